//! Few-shot prompt construction and candidate generation against pluggable
//! backends.

mod backend;
mod prompt;
mod remote;
mod spin;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{Backend, BackendError, CompletionRequest, MockBackend, MockMode, SpinnerBackend};
pub use prompt::{
    budget_tokens, build_prompt, extract_target, render_prompt, ExamplePair, PromptSpec, RenderedPrompt,
    DEFAULT_CONTEXT_BUDGET, DEFAULT_INSTRUCTION,
};
pub use remote::{extract_path, render_body, RateLimiter, RemoteBackend, RemoteConfig, API_KEY_ENV};
pub use spin::{spin, SpinMode, SpinPolicy, SynonymTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenerationError {
    #[error("invalid prompt: {0}")]
    InvalidPrompt(String),
    #[error("prompt needs {needed} tokens without examples, budget is {budget}")]
    BudgetExceeded { needed: usize, budget: usize },
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
    #[error("original text is empty")]
    EmptyOriginal,
    #[error("backend {backend} failed: {message}")]
    Backend { backend: String, message: String },
    #[error("backend {backend} returned only empty completions")]
    AllEmpty { backend: String },
    #[error("synonym table line {line}: {message}")]
    SynonymFormat { line: usize, message: String },
    #[error("io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenParams {
    /// Cap on new tokens as a fraction of the original's token count.
    pub max_new_tokens_ratio: f64,
    pub temperature: f64,
    pub candidates_per_original: usize,
    pub seed: u64,
    /// Extra attempts per candidate after an empty completion or a
    /// transient backend failure.
    pub retries: usize,
    /// First backoff delay; doubles on every transient failure.
    pub retry_backoff_ms: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            max_new_tokens_ratio: 0.9,
            temperature: 0.8,
            candidates_per_original: 4,
            seed: 0,
            retries: 3,
            retry_backoff_ms: 500,
        }
    }
}

impl GenParams {
    pub fn validate(&self) -> Result<(), GenerationError> {
        if !(self.max_new_tokens_ratio > 0.0 && self.max_new_tokens_ratio <= 1.0) {
            return Err(GenerationError::InvalidParams(format!(
                "max_new_tokens_ratio {} outside (0, 1]",
                self.max_new_tokens_ratio
            )));
        }
        if self.candidates_per_original == 0 {
            return Err(GenerationError::InvalidParams("candidates_per_original must be >= 1".into()));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(GenerationError::InvalidParams(format!("temperature {} is invalid", self.temperature)));
        }
        Ok(())
    }

    /// `floor(ratio × original_tokens)`.
    pub fn max_new_tokens(&self, original_tokens: usize) -> usize {
        // absorb representation error such as 0.9 * 30 = 26.999…
        (self.max_new_tokens_ratio * original_tokens as f64 + 1e-9).floor() as usize
    }
}

/// Cuts a completion at its first blank line, then keeps at most `cap`
/// whitespace tokens. Interior spacing of the kept part is preserved.
pub fn truncate_completion(text: &str, cap: usize) -> String {
    let first_para = match text.trim_start().find("\n\n") {
        Some(i) => &text.trim_start()[..i],
        None => text.trim_start(),
    };
    let mut end = 0;
    for (count, (start, token)) in token_spans(first_para).enumerate() {
        if count == cap {
            break;
        }
        end = start + token.len();
    }
    first_para[..end].trim().to_owned()
}

fn token_spans(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.split_whitespace()
        .map(move |t| (t.as_ptr() as usize - text.as_ptr() as usize, t))
}

/// splitmix64 finalizer; derives independent per-request seeds.
pub(crate) fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Raw generation output for one original, before scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generation {
    pub backend: String,
    pub prompt: String,
    pub examples_used: usize,
    pub max_new_tokens: usize,
    pub candidates: Vec<String>,
}

/// Requests `candidates_per_original` completions for `original`.
///
/// `spec.target` is replaced by `original`. Completions are cut at the
/// first blank line and at `max_new_tokens`; empty ones are retried and
/// finally dropped.
pub fn paraphrase<B: Backend + ?Sized>(
    backend: &B,
    original: &str,
    params: &GenParams,
    spec: &PromptSpec,
) -> Result<Generation, GenerationError> {
    params.validate()?;
    if original.trim().is_empty() {
        return Err(GenerationError::EmptyOriginal);
    }
    let spec = PromptSpec {
        target: original.to_owned(),
        ..spec.clone()
    };
    let rendered = render_prompt(&spec)?;
    let max_new_tokens = params.max_new_tokens(budget_tokens(original));
    let identity = backend.identity();

    let mut candidates = Vec::with_capacity(params.candidates_per_original);
    for index in 0..params.candidates_per_original {
        let mut backoff = Duration::from_millis(params.retry_backoff_ms);
        for attempt in 0..=params.retries {
            let request = CompletionRequest {
                prompt: &rendered.text,
                max_new_tokens,
                temperature: params.temperature,
                seed: mix_seed(params.seed, index as u64, attempt as u64),
            };
            match backend.complete(&request) {
                Ok(text) => {
                    let text = truncate_completion(&text, max_new_tokens);
                    if !text.is_empty() {
                        candidates.push(text);
                        break;
                    }
                }
                Err(BackendError::Transient(message)) => {
                    if attempt == params.retries {
                        return Err(GenerationError::Backend {
                            backend: identity,
                            message,
                        });
                    }
                    std::thread::sleep(backoff);
                    backoff *= 2;
                }
                Err(BackendError::Permanent(message)) => {
                    return Err(GenerationError::Backend {
                        backend: identity,
                        message,
                    })
                }
            }
        }
    }
    if candidates.is_empty() {
        return Err(GenerationError::AllEmpty { backend: identity });
    }
    Ok(Generation {
        backend: identity,
        prompt: rendered.text,
        examples_used: rendered.examples_used,
        max_new_tokens,
        candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn quick() -> GenParams {
        GenParams {
            retry_backoff_ms: 0,
            ..GenParams::default()
        }
    }

    #[test]
    fn cap_is_ninety_percent() {
        let p = GenParams::default();
        assert_eq!(p.max_new_tokens(20), 18);
        assert_eq!(p.max_new_tokens(30), 27);
        assert_eq!(p.max_new_tokens(1), 0);
        assert_eq!(p.max_new_tokens(11), 9);
    }

    #[test]
    fn requests_use_cap() {
        struct Recorder(AtomicUsize);
        impl Backend for Recorder {
            fn identity(&self) -> String {
                "recorder".into()
            }
            fn complete(&self, r: &CompletionRequest<'_>) -> Result<String, BackendError> {
                self.0.store(r.max_new_tokens, Ordering::SeqCst);
                Ok("x".into())
            }
        }
        let original = (0..20).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
        let rec = Recorder(AtomicUsize::new(0));
        let g = paraphrase(&rec, &original, &quick(), &PromptSpec::new("")).unwrap();
        assert_eq!(rec.0.load(Ordering::SeqCst), 18);
        assert_eq!(g.max_new_tokens, 18);
    }

    #[test]
    fn mock_fixed_repeats() {
        let g = paraphrase(&MockBackend::fixed("same text"), "an original text", &quick(), &PromptSpec::new("")).unwrap();
        assert_eq!(g.candidates, vec!["same text"; 4]);
        assert_eq!(g.backend, "mock:fixed");
    }

    #[test]
    fn identity_spinner_returns_original_when_uncapped() {
        let backend = SpinnerBackend::new(SpinPolicy::every_kth(4, SynonymTable::new()));
        let params = GenParams {
            max_new_tokens_ratio: 1.0,
            ..quick()
        };
        let text = "the quick brown fox jumps over the lazy dog";
        let g = paraphrase(&backend, text, &params, &PromptSpec::new("")).unwrap();
        assert!(g.candidates.iter().all(|c| c == text));
        // default ratio keeps floor(0.9 * 9) = 8 tokens
        let g = paraphrase(&backend, text, &quick(), &PromptSpec::new("")).unwrap();
        assert_eq!(g.candidates[0], "the quick brown fox jumps over the lazy");
    }

    #[test]
    fn truncation_rules() {
        assert_eq!(truncate_completion("  a b\n\nc d", 10), "a b");
        assert_eq!(truncate_completion("a  b c d", 2), "a  b");
        assert_eq!(truncate_completion("a b", 0), "");
        assert_eq!(truncate_completion("\n\n", 3), "");
    }

    #[test]
    fn empty_completions_are_retried_then_dropped() {
        struct Flaky(AtomicUsize);
        impl Backend for Flaky {
            fn identity(&self) -> String {
                "flaky".into()
            }
            fn complete(&self, _: &CompletionRequest<'_>) -> Result<String, BackendError> {
                let n = self.0.fetch_add(1, Ordering::SeqCst);
                Ok(if n.is_multiple_of(2) { "   ".into() } else { "ok".into() })
            }
        }
        let b = Flaky(AtomicUsize::new(0));
        let g = paraphrase(&b, "a b c d", &quick(), &PromptSpec::new("")).unwrap();
        assert_eq!(g.candidates.len(), 4);
        assert_eq!(b.0.load(Ordering::SeqCst), 8);

        let err = paraphrase(&MockBackend::fixed(""), "a b", &quick(), &PromptSpec::new("")).unwrap_err();
        assert_eq!(err, GenerationError::AllEmpty { backend: "mock:fixed".into() });
    }

    #[test]
    fn backend_failures_carry_identity() {
        struct Down(AtomicUsize, bool);
        impl Backend for Down {
            fn identity(&self) -> String {
                "down".into()
            }
            fn complete(&self, _: &CompletionRequest<'_>) -> Result<String, BackendError> {
                self.0.fetch_add(1, Ordering::SeqCst);
                if self.1 {
                    Err(BackendError::Transient("503".into()))
                } else {
                    Err(BackendError::Permanent("401".into()))
                }
            }
        }
        let transient = Down(AtomicUsize::new(0), true);
        let err = paraphrase(&transient, "a b", &quick(), &PromptSpec::new("")).unwrap_err();
        assert_eq!(
            err,
            GenerationError::Backend {
                backend: "down".into(),
                message: "503".into()
            }
        );
        assert_eq!(transient.0.load(Ordering::SeqCst), 4);

        let permanent = Down(AtomicUsize::new(0), false);
        assert!(paraphrase(&permanent, "a b", &quick(), &PromptSpec::new("")).is_err());
        assert_eq!(permanent.0.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn invalid_inputs() {
        let b = MockBackend::echo();
        assert_eq!(
            paraphrase(&b, " ", &quick(), &PromptSpec::new("")).unwrap_err(),
            GenerationError::EmptyOriginal
        );
        let bad = GenParams {
            max_new_tokens_ratio: 0.0,
            ..quick()
        };
        assert!(matches!(
            paraphrase(&b, "a", &bad, &PromptSpec::new("")),
            Err(GenerationError::InvalidParams(_))
        ));
        let bad = GenParams {
            candidates_per_original: 0,
            ..quick()
        };
        assert!(bad.validate().is_err());
    }
}
