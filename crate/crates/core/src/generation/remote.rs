//! HTTP completion adapter configured by a request template and a response
//! extraction path.

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::backend::{Backend, BackendError, CompletionRequest};

pub const API_KEY_ENV: &str = "PARAFORGE_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteConfig {
    pub endpoint: String,
    /// JSON body with `{{prompt}}`, `{{max_tokens}}` and `{{temperature}}`
    /// placeholders. Each is replaced by a JSON literal, so `{{prompt}}`
    /// must not be wrapped in quotes.
    pub body_template: String,
    /// Slash-separated key/index path to the completion text,
    /// e.g. `choices/0/text`.
    pub response_path: String,
    #[serde(default = "default_rpm")]
    pub requests_per_minute: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_rpm() -> u32 {
    60
}

fn default_timeout() -> u64 {
    60
}

pub fn render_body(template: &str, prompt: &str, max_tokens: usize, temperature: f64) -> String {
    let prompt = serde_json::to_string(prompt).expect("strings always serialize");
    let temperature = serde_json::Number::from_f64(temperature)
        .map(|n| n.to_string())
        .unwrap_or_else(|| "null".into());
    template
        .replace("{{prompt}}", &prompt)
        .replace("{{max_tokens}}", &max_tokens.to_string())
        .replace("{{temperature}}", &temperature)
}

/// Walks `path` through objects (by key) and arrays (by index).
pub fn extract_path<'a>(doc: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('/').filter(|s| !s.is_empty()).try_fold(doc, |node, key| match node {
        Value::Object(map) => map.get(key),
        Value::Array(items) => key.parse::<usize>().ok().and_then(|i| items.get(i)),
        _ => None,
    })
}

/// Sliding one-minute window of request start times.
#[derive(Debug)]
pub struct RateLimiter {
    per_minute: u32,
    window: Mutex<VecDeque<Instant>>,
}

impl RateLimiter {
    pub fn new(per_minute: u32) -> Self {
        Self {
            per_minute: per_minute.max(1),
            window: Mutex::new(VecDeque::new()),
        }
    }

    /// How long to wait before a request may start at `now`; `None` means
    /// the request is admitted and recorded.
    pub fn try_admit(&self, now: Instant) -> Option<Duration> {
        let mut window = self.window.lock().expect("rate limiter poisoned");
        let minute = Duration::from_secs(60);
        while window.front().is_some_and(|&t| now.duration_since(t) >= minute) {
            window.pop_front();
        }
        if window.len() < self.per_minute as usize {
            window.push_back(now);
            None
        } else {
            let oldest = *window.front().expect("window is full");
            Some(minute - now.duration_since(oldest))
        }
    }

    pub fn acquire(&self) {
        while let Some(wait) = self.try_admit(Instant::now()) {
            std::thread::sleep(wait);
        }
    }
}

pub struct RemoteBackend {
    config: RemoteConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
    limiter: RateLimiter,
}

impl std::fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteBackend")
            .field("config", &self.config)
            .field("api_key", &self.api_key.as_ref().map(|_| "<set>"))
            .finish()
    }
}

impl RemoteBackend {
    /// Reads the bearer token from `PARAFORGE_API_KEY` when set.
    pub fn new(config: RemoteConfig) -> Self {
        let api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Self::with_api_key(config, api_key)
    }

    pub fn with_api_key(config: RemoteConfig, api_key: Option<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        let limiter = RateLimiter::new(config.requests_per_minute);
        Self {
            config,
            api_key,
            agent,
            limiter,
        }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }
}

impl Backend for RemoteBackend {
    fn identity(&self) -> String {
        format!("remote:{}", self.config.endpoint)
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        self.limiter.acquire();
        let body = render_body(
            &self.config.body_template,
            request.prompt,
            request.max_new_tokens,
            request.temperature,
        );
        let mut call = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = call
            .content_type("application/json")
            .send(body.as_bytes())
            .map_err(|e| BackendError::Transient(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transient(e.to_string()))?;
        match status {
            200..=299 => {}
            429 | 500..=599 => return Err(BackendError::Transient(format!("HTTP {status}: {text}"))),
            _ => return Err(BackendError::Permanent(format!("HTTP {status}: {text}"))),
        }
        let doc: Value = serde_json::from_str(&text).map_err(|e| BackendError::Permanent(format!("response is not JSON: {e}")))?;
        match extract_path(&doc, &self.config.response_path) {
            Some(Value::String(s)) => Ok(s.clone()),
            Some(other) => Err(BackendError::Permanent(format!(
                "{} is not a string: {other}",
                self.config.response_path
            ))),
            None => Err(BackendError::Permanent(format!(
                "{} not found in response",
                self.config.response_path
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn body_template_escapes_prompt() {
        let t = r#"{"prompt": {{prompt}}, "max_tokens": {{max_tokens}}, "temperature": {{temperature}}}"#;
        let body = render_body(t, "say \"hi\"\nnow", 18, 0.8);
        let v: Value = serde_json::from_str(&body).unwrap();
        assert_eq!(v, json!({"prompt": "say \"hi\"\nnow", "max_tokens": 18, "temperature": 0.8}));
    }

    #[test]
    fn path_extraction() {
        let doc = json!({"choices": [{"text": "a"}, {"text": "b"}]});
        assert_eq!(extract_path(&doc, "choices/1/text"), Some(&json!("b")));
        assert_eq!(extract_path(&doc, "choices/2/text"), None);
        assert_eq!(extract_path(&doc, "choices/x"), None);
        assert_eq!(extract_path(&doc, ""), Some(&doc));
    }

    #[test]
    fn rate_limiter_window() {
        let rl = RateLimiter::new(2);
        let t0 = Instant::now();
        assert_eq!(rl.try_admit(t0), None);
        assert_eq!(rl.try_admit(t0 + Duration::from_secs(1)), None);
        assert_eq!(rl.try_admit(t0 + Duration::from_secs(10)), Some(Duration::from_secs(50)));
        assert_eq!(rl.try_admit(t0 + Duration::from_secs(60)), None);
    }
}
