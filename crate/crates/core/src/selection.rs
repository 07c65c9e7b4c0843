//! Pareto-optimal paraphrase candidate selection.
//!
//! A candidate is scored on four axes against its original: semantic match
//! and likelihood are maximized, ROUGE-L and BLEU are minimized. Selection
//! first restricts to the non-dominated candidates, then breaks the
//! remaining ambiguity with a weighted scalar.

use serde::{Deserialize, Serialize};

use crate::textmetrics::{self, EmbeddingTable, MetricError, Scheme, TokenSeq};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub sem_match: f64,
    pub lm_like: f64,
    pub rouge_l: f64,
    pub bleu: f64,
}

impl MetricVector {
    pub fn new(sem_match: f64, lm_like: f64, rouge_l: f64, bleu: f64) -> Self {
        Self {
            sem_match,
            lm_like,
            rouge_l,
            bleu,
        }
    }

    /// All axes oriented so that larger is better.
    pub fn oriented(&self) -> [f64; 4] {
        [self.sem_match, self.lm_like, -self.rouge_l, -self.bleu]
    }

    /// `true` when `self` is at least as good as `other` on every axis and
    /// strictly better on one.
    pub fn dominates(&self, other: &MetricVector) -> bool {
        dominates_oriented(&self.oriented(), &other.oriented())
    }
}

pub(crate) fn dominates_oriented(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return false;
        }
        if x > y {
            strictly = true;
        }
    }
    strictly
}

/// Metric settings shared by every candidate scored in a run.
#[derive(Debug, Clone)]
pub struct Scorer {
    pub embeddings: EmbeddingTable,
    pub scheme: Scheme,
    pub bleu_max_n: usize,
    pub lm_order: usize,
}

impl Scorer {
    pub fn new(embeddings: EmbeddingTable) -> Self {
        Self {
            embeddings,
            scheme: Scheme::default(),
            bleu_max_n: 4,
            lm_order: 2,
        }
    }

    pub fn score_text(&self, candidate: &str, original: &str) -> Result<MetricVector, MetricError> {
        let c = textmetrics::tokenize(candidate, self.scheme)?;
        let o = textmetrics::tokenize(original, self.scheme)?;
        self.score(&c, &o)
    }

    pub fn score(&self, candidate: &TokenSeq, original: &TokenSeq) -> Result<MetricVector, MetricError> {
        metric_vector(candidate, original, &self.embeddings, self.bleu_max_n, self.lm_order)
    }
}

/// The four selection scores of `candidate` against `original`.
pub fn metric_vector(
    candidate: &TokenSeq,
    original: &TokenSeq,
    emb: &EmbeddingTable,
    bleu_max_n: usize,
    lm_order: usize,
) -> Result<MetricVector, MetricError> {
    Ok(MetricVector {
        sem_match: textmetrics::sem_match(candidate, original, emb)?.value(),
        lm_like: textmetrics::lm_like(candidate, original, lm_order)?.value(),
        rouge_l: textmetrics::rouge_l(candidate, original)?.value(),
        bleu: textmetrics::bleu(candidate, original, bleu_max_n)?.value(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub text: String,
    pub metrics: MetricVector,
}

/// Scored candidates for one original. `candidate_id` is the position in
/// `candidates`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub original_id: String,
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    /// Scores every text against `original`. Fails on the first metric error.
    pub fn score<S: AsRef<str>>(
        original_id: impl Into<String>,
        original: &str,
        texts: &[S],
        scorer: &Scorer,
    ) -> Result<Self, MetricError> {
        let orig = textmetrics::tokenize(original, scorer.scheme)?;
        let candidates = texts
            .iter()
            .map(|t| {
                let tokens = textmetrics::tokenize(t.as_ref(), scorer.scheme)?;
                Ok(Candidate {
                    text: t.as_ref().to_owned(),
                    metrics: scorer.score(&tokens, &orig)?,
                })
            })
            .collect::<Result<Vec<_>, MetricError>>()?;
        Ok(Self {
            original_id: original_id.into(),
            candidates,
        })
    }

    pub fn vectors(&self) -> Vec<MetricVector> {
        self.candidates.iter().map(|c| c.metrics).collect()
    }
}

/// Indices of the non-dominated vectors, in input order.
pub fn pareto_frontier(vectors: &[MetricVector]) -> Vec<usize> {
    let oriented: Vec<[f64; 4]> = vectors.iter().map(MetricVector::oriented).collect();
    (0..oriented.len())
        .filter(|&i| {
            !oriented
                .iter()
                .enumerate()
                .any(|(j, other)| j != i && dominates_oriented(other, &oriented[i]))
        })
        .collect()
}

/// Scalar tie-break weights. The default weighs all four axes equally:
/// `s = (sem_match + lm_like)/2 − (rouge_l + bleu)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionWeights {
    pub sem_match: f64,
    pub lm_like: f64,
    pub rouge_l: f64,
    pub bleu: f64,
}

impl Default for SelectionWeights {
    fn default() -> Self {
        Self {
            sem_match: 0.5,
            lm_like: 0.5,
            rouge_l: 0.5,
            bleu: 0.5,
        }
    }
}

impl SelectionWeights {
    pub fn scalar(&self, v: &MetricVector) -> f64 {
        self.sem_match * v.sem_match + self.lm_like * v.lm_like - self.rouge_l * v.rouge_l - self.bleu * v.bleu
    }
}

/// Picks the frontier member with the largest scalar; exact ties go to the
/// lowest index. Returns `None` only for an empty slice.
///
/// The frontier is invariant under monotone per-axis rescaling, the scalar
/// tie-break is not.
pub fn select_index(vectors: &[MetricVector], weights: &SelectionWeights) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for i in pareto_frontier(vectors) {
        let s = weights.scalar(&vectors[i]);
        match best {
            Some((_, b)) if s <= b => {}
            _ => best = Some((i, s)),
        }
    }
    best.map(|(i, _)| i)
}

/// [`select_index`] with default weights over a scored set.
pub fn select_candidate(set: &CandidateSet) -> Option<usize> {
    select_index(&set.vectors(), &SelectionWeights::default())
}
