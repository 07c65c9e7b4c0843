use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::prompt::extract_target;
use super::spin::{spin, SpinMode, SpinPolicy};

/// One completion call.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest<'a> {
    pub prompt: &'a str,
    pub max_new_tokens: usize,
    pub temperature: f64,
    /// Derived per candidate and attempt so seeded backends vary across
    /// candidates but repeat across runs.
    pub seed: u64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    /// Worth retrying: rate limits, server errors, dropped connections.
    #[error("transient: {0}")]
    Transient(String),
    #[error("{0}")]
    Permanent(String),
}

/// A text completion service.
pub trait Backend: Send + Sync {
    /// Stable name recorded in provenance.
    fn identity(&self) -> String;

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError>;
}

impl<B: Backend + ?Sized> Backend for &B {
    fn identity(&self) -> String {
        (**self).identity()
    }
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn identity(&self) -> String {
        (**self).identity()
    }
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MockMode {
    /// Always returns the given string.
    Fixed(String),
    /// Returns the prompt's target unchanged.
    Echo,
    /// Returns the prompt's target with its tokens shuffled by the request seed.
    Shuffle,
}

/// Offline backend for tests and dry runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MockBackend {
    pub mode: MockMode,
}

impl MockBackend {
    pub fn fixed(text: impl Into<String>) -> Self {
        Self {
            mode: MockMode::Fixed(text.into()),
        }
    }

    pub fn echo() -> Self {
        Self { mode: MockMode::Echo }
    }

    pub fn shuffle() -> Self {
        Self { mode: MockMode::Shuffle }
    }
}

fn target_of(prompt: &str) -> &str {
    // fall back to the whole prompt for callers that send raw text
    extract_target(prompt).unwrap_or(prompt)
}

impl Backend for MockBackend {
    fn identity(&self) -> String {
        match &self.mode {
            MockMode::Fixed(_) => "mock:fixed".into(),
            MockMode::Echo => "mock:echo".into(),
            MockMode::Shuffle => "mock:shuffle".into(),
        }
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        Ok(match &self.mode {
            MockMode::Fixed(s) => s.clone(),
            MockMode::Echo => target_of(request.prompt).to_owned(),
            MockMode::Shuffle => {
                let mut tokens: Vec<&str> = target_of(request.prompt).split_whitespace().collect();
                tokens.shuffle(&mut ChaCha8Rng::seed_from_u64(request.seed));
                tokens.join(" ")
            }
        })
    }
}

/// Synonym spinner exposed through the backend interface. It spins the
/// prompt's target and ignores the few-shot examples.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinnerBackend {
    pub policy: SpinPolicy,
}

impl SpinnerBackend {
    pub fn new(policy: SpinPolicy) -> Self {
        Self { policy }
    }
}

impl Backend for SpinnerBackend {
    fn identity(&self) -> String {
        match self.policy.mode {
            SpinMode::EveryKth { period } => format!("spinner:every_kth:{period}"),
            SpinMode::Probability { prob } => format!("spinner:probability:{prob}"),
        }
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        spin(target_of(request.prompt), &self.policy, request.seed).map_err(|e| BackendError::Permanent(e.to_string()))
    }
}
