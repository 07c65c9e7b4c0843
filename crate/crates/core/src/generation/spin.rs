//! Rule-based synonym spinning, the control paraphraser.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::GenerationError;

/// Lower-cased token → replacement token.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymTable {
    map: HashMap<String, String>,
}

impl SynonymTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Keys are stored lower-cased. Replacements must be single tokens.
    pub fn insert(&mut self, word: &str, synonym: &str) -> Result<(), GenerationError> {
        if word.is_empty() || synonym.is_empty() || word.contains(char::is_whitespace) || synonym.contains(char::is_whitespace) {
            return Err(GenerationError::SynonymFormat {
                line: 0,
                message: format!("entries must be single tokens: {word:?} -> {synonym:?}"),
            });
        }
        self.map.insert(word.to_lowercase(), synonym.to_owned());
        Ok(())
    }

    pub fn get(&self, word: &str) -> Option<&str> {
        self.map.get(&word.to_lowercase()).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.map.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Two tab-separated tokens per line. Blank lines and `#` comments are
    /// skipped.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, GenerationError> {
        let mut table = Self::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| GenerationError::Io(e.to_string()))?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let (Some(word), Some(syn), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(GenerationError::SynonymFormat {
                    line: idx + 1,
                    message: "expected two tab-separated tokens".into(),
                });
            };
            table.insert(word.trim(), syn.trim()).map_err(|e| match e {
                GenerationError::SynonymFormat { message, .. } => GenerationError::SynonymFormat {
                    line: idx + 1,
                    message,
                },
                other => other,
            })?;
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GenerationError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| GenerationError::Io(format!("{}: {e}", path.display())))?;
        Self::from_reader(std::io::BufReader::new(file))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpinMode {
    /// Replace tokens at 1-indexed positions `period, 2·period, …`.
    EveryKth { period: usize },
    /// Replace each token independently with probability `prob`.
    Probability { prob: f64 },
}

impl Default for SpinMode {
    fn default() -> Self {
        SpinMode::EveryKth { period: 4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinPolicy {
    pub mode: SpinMode,
    pub synonyms: SynonymTable,
}

impl SpinPolicy {
    pub fn every_kth(period: usize, synonyms: SynonymTable) -> Self {
        Self {
            mode: SpinMode::EveryKth { period },
            synonyms,
        }
    }

    pub fn probability(prob: f64, synonyms: SynonymTable) -> Self {
        Self {
            mode: SpinMode::Probability { prob },
            synonyms,
        }
    }

    pub fn validate(&self) -> Result<(), GenerationError> {
        match self.mode {
            SpinMode::EveryKth { period: 0 } => {
                Err(GenerationError::InvalidParams("spin period must be >= 1".into()))
            }
            SpinMode::Probability { prob } if !(0.0..=1.0).contains(&prob) => {
                Err(GenerationError::InvalidParams(format!("spin probability {prob} outside [0, 1]")))
            }
            _ => Ok(()),
        }
    }
}

/// Replaces the word core of `token`, keeping surrounding punctuation and
/// the case of the first letter.
fn replace_token(token: &str, table: &SynonymTable) -> Option<String> {
    let core = crate::textmetrics::trim_punct(token);
    if core.is_empty() {
        return None;
    }
    let synonym = table.get(core)?;
    let start = token.find(core).expect("core is a substring");
    let (prefix, rest) = token.split_at(start);
    let suffix = &rest[core.len()..];

    let upper = core.chars().next().is_some_and(char::is_uppercase);
    let mut chars = synonym.chars();
    let first = chars.next().expect("synonyms are non-empty");
    let first: String = if upper {
        first.to_uppercase().collect()
    } else {
        first.to_lowercase().collect()
    };
    Some(format!("{prefix}{first}{}{suffix}", chars.as_str()))
}

/// Spins `text` under `policy`. Tokens are whitespace-separated and the
/// output is re-joined with single spaces. `seed` only matters in
/// probability mode.
pub fn spin(text: &str, policy: &SpinPolicy, seed: u64) -> Result<String, GenerationError> {
    policy.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out: Vec<String> = text
        .split_whitespace()
        .enumerate()
        .map(|(i, token)| {
            let pick = match policy.mode {
                SpinMode::EveryKth { period } => (i + 1) % period == 0,
                // draw for every token so the stream does not depend on table coverage
                SpinMode::Probability { prob } => rng.random::<f64>() < prob,
            };
            if pick {
                replace_token(token, &policy.synonyms).unwrap_or_else(|| token.to_owned())
            } else {
                token.to_owned()
            }
        })
        .collect();
    Ok(out.join(" "))
}
