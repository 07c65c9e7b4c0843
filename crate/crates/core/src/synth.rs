//! Synthetic fixtures: a bundled synonym table, static embeddings derived
//! from it, and random originals built from its vocabulary.
//!
//! Each embedding has `dim - 1` meaning dimensions and one register
//! dimension. A synonym shares its base word's meaning (plus a little
//! noise) but sits on the opposite side of the register axis, so spun text
//! drifts measurably in mean-pooled embedding space.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Source};
use crate::generation::SynonymTable;
use crate::textmetrics::EmbeddingTable;

pub const BUNDLED_SYNONYMS: &str = include_str!("../data/synonyms.tsv");

/// Function words mixed into synthetic text; none has a synonym.
pub const FILLER: &[&str] = &[
    "the", "a", "of", "and", "to", "in", "is", "that", "for", "on", "with", "as", "by", "this", "we", "it", "are", "be",
    "was", "from", "an", "or", "which", "these", "our", "can", "not", "at", "has", "their", "also", "more", "most", "one",
    "two", "each", "between", "into", "than", "other", "such", "both", "under",
];

pub fn bundled_synonyms() -> SynonymTable {
    SynonymTable::from_reader(BUNDLED_SYNONYMS.as_bytes()).expect("bundled table parses")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub seed: u64,
    pub dim: usize,
    /// Register coordinate mean: `+shift` for base words, `-shift` for
    /// synonyms.
    pub register_shift: f64,
    pub register_noise: f64,
    /// Spread of a synonym's meaning around its base word.
    pub synonym_noise: f64,
    pub min_tokens: usize,
    pub max_tokens: usize,
    /// Share of filler tokens in generated text.
    pub filler_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            dim: 16,
            register_shift: 1.0,
            register_noise: 1.0,
            synonym_noise: 0.3,
            min_tokens: 40,
            max_tokens: 80,
            filler_rate: 0.45,
        }
    }
}

/// Keys of the table, in sorted order.
pub fn base_words(table: &SynonymTable) -> Vec<String> {
    table.iter().map(|(k, _)| k.to_owned()).collect::<BTreeSet<_>>().into_iter().collect()
}

/// Embeddings for filler, base words and their synonyms.
pub fn synthetic_embeddings(table: &SynonymTable, config: &SynthConfig) -> EmbeddingTable {
    assert!(config.dim >= 2, "need at least one meaning and one register dimension");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let meaning_dims = config.dim - 1;
    let mut emb = EmbeddingTable::new(config.dim);
    let vector = |rng: &mut ChaCha8Rng, around: Option<&[f64]>, spread: f64, register: f64| -> Vec<f64> {
        let mut v: Vec<f64> = match around {
            Some(base) => base[..meaning_dims].iter().map(|b| b + spread * unit.sample(rng)).collect(),
            None => (0..meaning_dims).map(|_| unit.sample(rng)).collect(),
        };
        v.push(register + config.register_noise * unit.sample(rng));
        v
    };
    for word in FILLER {
        let v = vector(&mut rng, None, 0.0, config.register_shift);
        emb.insert(*word, v);
    }
    for base in base_words(table) {
        let v = vector(&mut rng, None, 0.0, config.register_shift);
        let synonym = table.get(&base).expect("key exists").to_lowercase();
        if emb.get(&synonym).is_none() {
            let s = vector(&mut rng, Some(&v), config.synonym_noise, -config.register_shift);
            emb.insert(synonym, s);
        }
        emb.insert(base, v);
    }
    emb
}

/// `n` random originals with ids `s<i>-ORIG-0`, cycling through the
/// arxiv, wikipedia and theses sources.
pub fn synthetic_originals(n: usize, table: &SynonymTable, config: &SynthConfig) -> Vec<Document> {
    let words = base_words(table);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5e_ed0f_0419);
    let sources = [Source::Arxiv, Source::Wikipedia, Source::Theses];
    (0..n)
        .map(|i| {
            let len = rng.random_range(config.min_tokens..=config.max_tokens.max(config.min_tokens));
            let mut tokens: Vec<String> = Vec::with_capacity(len);
            let mut sentence_left = 0;
            for k in 0..len {
                let word = if rng.random::<f64>() < config.filler_rate {
                    FILLER.choose(&mut rng).expect("non-empty")
                } else {
                    words.choose(&mut rng).expect("non-empty table").as_str()
                };
                let mut token = if sentence_left == 0 {
                    sentence_left = rng.random_range(8..=16);
                    capitalize(word)
                } else {
                    word.to_owned()
                };
                sentence_left -= 1;
                if sentence_left == 0 || k + 1 == len {
                    token.push('.');
                    sentence_left = 0;
                }
                tokens.push(token);
            }
            Document {
                id: format!("s{i:05}-ORIG-0"),
                source: sources[i % sources.len()],
                text: tokens.join(" "),
            }
        })
        .collect()
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}
