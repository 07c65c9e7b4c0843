//! Automated machine-paraphrase detectors.
//!
//! * [`GaussianNb`] over mean-pooled word embeddings, with
//!   [`MultinomialNb`] over token counts as an ablation.
//! * [`textmatch_detect`], a verbatim-overlap proxy for commercial
//!   plagiarism checkers.
//! * [`FewShotDetector`], which asks a completion backend to label a text
//!   given labeled examples, and [`ExternalDetector`] for remote
//!   classifiers that answer with a label directly.
//! * [`RandomDetector`], the chance baseline.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::generation::{budget_tokens, Backend, BackendError, CompletionRequest};
use crate::textmetrics::{self, EmbeddingTable, MetricError, Scheme, TokenSeq};

#[derive(Debug, Error)]
pub enum DetectionError {
    #[error("document is empty")]
    EmptyDocument,
    #[error("every token is out of vocabulary")]
    AllOutOfVocabulary,
    #[error("no training examples for class {0}")]
    MissingClass(Verdict),
    #[error("class {0} has {1} examples, need at least 2")]
    ClassTooSmall(Verdict, usize),
    #[error("{features} feature vectors but {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
    #[error("feature dim {got} does not match model dim {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("variance floor must be positive, got {0}")]
    InvalidFloor(f64),
    #[error("reference index is empty")]
    EmptyIndex,
    #[error("few-shot examples must contain both labels")]
    ExamplesMissingLabel,
    #[error("completion has no label keyword: {0:?}")]
    Unparseable(String),
    #[error("backend {backend}: {message}")]
    Backend { backend: String, message: String },
    #[error("model file: {0}")]
    ModelFormat(String),
    #[error("metric: {0}")]
    Metric(#[from] MetricError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Binary verdict on a text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Machine,
    Original,
}

impl Verdict {
    pub const BOTH: [Verdict; 2] = [Verdict::Machine, Verdict::Original];

    pub fn index(self) -> usize {
        match self {
            Verdict::Machine => 0,
            Verdict::Original => 1,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Verdict::Machine => Verdict::Original,
            Verdict::Original => Verdict::Machine,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Machine => "machine",
            Verdict::Original => "original",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Verdict,
    /// Posterior (or a calibrated stand-in) of `label`, at least 0.5.
    pub confidence: f64,
    pub detector: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub oov_ratio: f64,
}

/// Mean of the in-vocabulary token vectors.
pub fn embed_doc(doc: &TokenSeq, emb: &EmbeddingTable) -> Result<FeatureVector, DetectionError> {
    if doc.is_empty() {
        return Err(DetectionError::EmptyDocument);
    }
    let mut sum = vec![0.0; emb.dim()];
    let mut hits = 0usize;
    for token in doc.tokens() {
        if let Some(v) = emb.get(token) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
            hits += 1;
        }
    }
    if hits == 0 {
        return Err(DetectionError::AllOutOfVocabulary);
    }
    sum.iter_mut().for_each(|s| *s /= hits as f64);
    Ok(FeatureVector {
        values: sum,
        oov_ratio: 1.0 - hits as f64 / doc.len() as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub label: Verdict,
    pub prior: f64,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

impl ClassStats {
    fn log_joint(&self, x: &[f64]) -> f64 {
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        self.prior.ln()
            + self
                .means
                .iter()
                .zip(&self.variances)
                .zip(x)
                .map(|((m, v), xi)| -0.5 * (ln_2pi + v.ln()) - (xi - m).powi(2) / (2.0 * v))
                .sum::<f64>()
    }
}

/// Gaussian naive Bayes with per-dimension variances floored at
/// `variance_floor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    pub classes: Vec<ClassStats>,
    pub variance_floor: f64,
}

fn count_labels(labels: &[Verdict]) -> Result<[usize; 2], DetectionError> {
    let mut counts = [0usize; 2];
    for l in labels {
        counts[l.index()] += 1;
    }
    for v in Verdict::BOTH {
        match counts[v.index()] {
            0 => return Err(DetectionError::MissingClass(v)),
            1 => return Err(DetectionError::ClassTooSmall(v, 1)),
            _ => {}
        }
    }
    Ok(counts)
}

/// Fits class priors, means and (population) variances.
pub fn train_nb(features: &[FeatureVector], labels: &[Verdict], variance_floor: f64) -> Result<GaussianNb, DetectionError> {
    if features.len() != labels.len() {
        return Err(DetectionError::LengthMismatch {
            features: features.len(),
            labels: labels.len(),
        });
    }
    if variance_floor.is_nan() || variance_floor <= 0.0 {
        return Err(DetectionError::InvalidFloor(variance_floor));
    }
    let counts = count_labels(labels)?;
    let dim = features[0].values.len();
    if let Some(f) = features.iter().find(|f| f.values.len() != dim) {
        return Err(DetectionError::DimMismatch {
            expected: dim,
            got: f.values.len(),
        });
    }
    let total = labels.len() as f64;
    let classes = Verdict::BOTH
        .into_iter()
        .map(|class| {
            let n = counts[class.index()] as f64;
            let members = || features.iter().zip(labels).filter(move |(_, l)| **l == class).map(|(f, _)| &f.values);
            let mut means = vec![0.0; dim];
            for x in members() {
                for (m, xi) in means.iter_mut().zip(x) {
                    *m += xi;
                }
            }
            means.iter_mut().for_each(|m| *m /= n);
            let mut variances = vec![0.0; dim];
            for x in members() {
                for ((v, xi), m) in variances.iter_mut().zip(x).zip(&means) {
                    *v += (xi - m).powi(2);
                }
            }
            variances.iter_mut().for_each(|v| *v = (*v / n).max(variance_floor));
            ClassStats {
                label: class,
                prior: n / total,
                means,
                variances,
            }
        })
        .collect();
    Ok(GaussianNb {
        classes,
        variance_floor,
    })
}

/// Two-class posterior from log joints; exact ties go to `Original`.
fn decide(scores: &[(Verdict, f64)], detector: &str) -> Prediction {
    let (mut best, mut best_score) = (Verdict::Original, f64::NEG_INFINITY);
    for &(label, s) in scores {
        if s > best_score || (s == best_score && label == Verdict::Original) {
            best = label;
            best_score = s;
        }
    }
    let log_norm = scores
        .iter()
        .map(|(_, s)| (s - best_score).exp())
        .sum::<f64>()
        .ln();
    Prediction {
        label: best,
        confidence: (-log_norm).exp(),
        detector: detector.to_owned(),
    }
}

impl GaussianNb {
    pub fn dim(&self) -> usize {
        self.classes[0].means.len()
    }

    /// Log prior plus summed Gaussian log densities per class.
    pub fn log_joint(&self, feat: &FeatureVector) -> Result<Vec<(Verdict, f64)>, DetectionError> {
        if feat.values.len() != self.dim() {
            return Err(DetectionError::DimMismatch {
                expected: self.dim(),
                got: feat.values.len(),
            });
        }
        Ok(self.classes.iter().map(|c| (c.label, c.log_joint(&feat.values))).collect())
    }

    pub fn predict(&self, feat: &FeatureVector) -> Result<Prediction, DetectionError> {
        Ok(decide(&self.log_joint(feat)?, "w2v+nb"))
    }
}

pub fn nb_predict(model: &GaussianNb, feat: &FeatureVector) -> Result<Prediction, DetectionError> {
    model.predict(feat)
}

pub const MODEL_FORMAT: &str = "paraforge-detector";
pub const MODEL_VERSION: u32 = 1;

/// Persisted detector: versioned JSON with the embedding digest it was
/// trained against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub scheme: Scheme,
    pub embedding_digest: Option<String>,
    pub model: DetectorModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DetectorModel {
    GaussianNb(GaussianNb),
    MultinomialNb(MultinomialNb),
}

impl ModelFile {
    pub fn new(model: DetectorModel, scheme: Scheme, embedding_digest: Option<String>) -> Self {
        Self {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            scheme,
            embedding_digest,
            model,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DetectionError> {
        let json = serde_json::to_string_pretty(self).map_err(|e| DetectionError::ModelFormat(e.to_string()))?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DetectionError> {
        let text = std::fs::read_to_string(path)?;
        let file: ModelFile = serde_json::from_str(&text).map_err(|e| DetectionError::ModelFormat(e.to_string()))?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(DetectionError::ModelFormat(format!(
                "unsupported model {} v{}",
                file.format, file.version
            )));
        }
        Ok(file)
    }
}

/// Multinomial naive Bayes over token counts with additive smoothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultinomialNb {
    pub alpha: f64,
    pub vocab_size: usize,
    /// Per class: prior and token counts. Ordered maps keep the JSON stable.
    pub classes: Vec<MultinomialClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultinomialClass {
    pub label: Verdict,
    pub prior: f64,
    pub total: u64,
    pub counts: BTreeMap<String, u64>,
}

pub fn train_multinomial(docs: &[TokenSeq], labels: &[Verdict], alpha: f64) -> Result<MultinomialNb, DetectionError> {
    if docs.len() != labels.len() {
        return Err(DetectionError::LengthMismatch {
            features: docs.len(),
            labels: labels.len(),
        });
    }
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(DetectionError::InvalidFloor(alpha));
    }
    let n = count_labels(labels)?;
    let mut vocab = std::collections::HashSet::new();
    let classes = Verdict::BOTH
        .into_iter()
        .map(|class| {
            let mut counts = BTreeMap::new();
            let mut total = 0u64;
            for (doc, _) in docs.iter().zip(labels).filter(|(_, l)| **l == class) {
                for t in doc.tokens() {
                    *counts.entry(t.clone()).or_insert(0u64) += 1;
                    total += 1;
                    vocab.insert(t.clone());
                }
            }
            MultinomialClass {
                label: class,
                prior: n[class.index()] as f64 / labels.len() as f64,
                total,
                counts,
            }
        })
        .collect();
    Ok(MultinomialNb {
        alpha,
        vocab_size: vocab.len(),
        classes,
    })
}

impl MultinomialNb {
    pub fn predict(&self, doc: &TokenSeq) -> Result<Prediction, DetectionError> {
        if doc.is_empty() {
            return Err(DetectionError::EmptyDocument);
        }
        let v = self.vocab_size as f64;
        let scores: Vec<(Verdict, f64)> = self
            .classes
            .iter()
            .map(|c| {
                let denom = (c.total as f64 + self.alpha * v).ln();
                let lik: f64 = doc
                    .tokens()
                    .iter()
                    .filter(|t| self.classes.iter().any(|k| k.counts.contains_key(*t)))
                    .map(|t| (c.counts.get(t).copied().unwrap_or(0) as f64 + self.alpha).ln() - denom)
                    .sum();
                (c.label, c.prior.ln() + lik)
            })
            .collect();
        Ok(decide(&scores, "ngram+nb"))
    }
}

/// Labels `doc` by its best verbatim overlap with the reference index.
///
/// A match above `threshold` means the text reuses an indexed source and
/// is labeled `Original`; anything at or below is labeled `Machine`.
/// Returns the prediction and the best match score.
pub fn textmatch_detect(
    doc: &TokenSeq,
    index: &[TokenSeq],
    threshold: f64,
    n: usize,
) -> Result<(Prediction, f64), DetectionError> {
    if index.is_empty() {
        return Err(DetectionError::EmptyIndex);
    }
    let mut best = 0.0f64;
    for reference in index {
        best = best.max(textmetrics::text_match(doc, reference, n)?.value());
        if best >= 1.0 {
            break;
        }
    }
    let (label, confidence) = if best > threshold {
        (Verdict::Original, best)
    } else {
        (Verdict::Machine, 1.0 - best)
    };
    Ok((
        Prediction {
            label,
            confidence: confidence.max(0.5),
            detector: "text-match".into(),
        },
        best,
    ))
}

pub const FEWSHOT_INSTRUCTION: &str = "Decide whether each text is machine-paraphrased or original.";

/// Renders the classification prompt, dropping trailing examples to stay
/// within `budget` whitespace tokens.
pub fn fewshot_prompt(doc: &str, examples: &[(String, Verdict)], budget: usize) -> String {
    let mut prompt = format!("{FEWSHOT_INSTRUCTION}\n\n");
    let tail = format!("Text: {doc}\nLabel:");
    let mut used = budget_tokens(&prompt) + budget_tokens(&tail);
    for (text, label) in examples {
        let name = match label {
            Verdict::Machine => "machine-paraphrased",
            Verdict::Original => "original",
        };
        let block = format!("Text: {text}\nLabel: {name}\n\n");
        let cost = budget_tokens(&block);
        if used + cost > budget {
            break;
        }
        used += cost;
        prompt.push_str(&block);
    }
    prompt.push_str(&tail);
    prompt
}

/// First label keyword in a completion: a word starting with `machine`
/// or the word `original`.
pub fn parse_label(completion: &str) -> Option<Verdict> {
    completion
        .split(|c: char| !(c.is_alphanumeric() || c == '-'))
        .map(str::to_lowercase)
        .find_map(|w| {
            if w.starts_with("machine") {
                Some(Verdict::Machine)
            } else if w == "original" {
                Some(Verdict::Original)
            } else {
                None
            }
        })
}

/// Anything that labels a raw text.
pub trait Detector: Send + Sync {
    fn name(&self) -> String;
    fn predict(&self, text: &str) -> Result<Prediction, DetectionError>;
}

/// Fair coin keyed on `(seed, text)`, so predictions do not depend on
/// evaluation order.
#[derive(Debug, Clone)]
pub struct RandomDetector {
    pub seed: u64,
}

impl Detector for RandomDetector {
    fn name(&self) -> String {
        "random".into()
    }

    fn predict(&self, text: &str) -> Result<Prediction, DetectionError> {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(text.as_bytes());
        let bit = h.finalize()[0] & 1;
        Ok(Prediction {
            label: if bit == 0 { Verdict::Machine } else { Verdict::Original },
            confidence: 0.5,
            detector: self.name(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct EmbeddingNbDetector {
    pub model: GaussianNb,
    pub embeddings: EmbeddingTable,
    pub scheme: Scheme,
}

impl EmbeddingNbDetector {
    pub fn train(
        texts: &[&str],
        labels: &[Verdict],
        embeddings: EmbeddingTable,
        scheme: Scheme,
        variance_floor: f64,
    ) -> Result<Self, DetectionError> {
        let features = texts
            .iter()
            .map(|t| embed_doc(&textmetrics::tokenize(t, scheme)?, &embeddings))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            model: train_nb(&features, labels, variance_floor)?,
            embeddings,
            scheme,
        })
    }
}

impl Detector for EmbeddingNbDetector {
    fn name(&self) -> String {
        "w2v+nb".into()
    }

    fn predict(&self, text: &str) -> Result<Prediction, DetectionError> {
        let feat = embed_doc(&textmetrics::tokenize(text, self.scheme)?, &self.embeddings)?;
        self.model.predict(&feat)
    }
}

#[derive(Debug, Clone)]
pub struct MultinomialNbDetector {
    pub model: MultinomialNb,
    pub scheme: Scheme,
}

impl Detector for MultinomialNbDetector {
    fn name(&self) -> String {
        "ngram+nb".into()
    }

    fn predict(&self, text: &str) -> Result<Prediction, DetectionError> {
        self.model.predict(&textmetrics::tokenize(text, self.scheme)?)
    }
}

#[derive(Debug, Clone)]
pub struct TextMatchDetector {
    pub index: Vec<TokenSeq>,
    pub threshold: f64,
    pub n: usize,
    pub scheme: Scheme,
}

impl TextMatchDetector {
    pub fn new<S: AsRef<str>>(sources: &[S], scheme: Scheme) -> Result<Self, DetectionError> {
        let index = sources
            .iter()
            .map(|s| textmetrics::tokenize(s.as_ref(), scheme))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            index,
            threshold: 0.5,
            n: 3,
            scheme,
        })
    }
}

impl Detector for TextMatchDetector {
    fn name(&self) -> String {
        "text-match".into()
    }

    fn predict(&self, text: &str) -> Result<Prediction, DetectionError> {
        let doc = textmetrics::tokenize(text, self.scheme)?;
        textmatch_detect(&doc, &self.index, self.threshold, self.n).map(|(p, _)| p)
    }
}

/// In-context classifier over a completion backend.
pub struct FewShotDetector<B> {
    pub backend: B,
    pub examples: Vec<(String, Verdict)>,
    pub budget: usize,
    pub max_new_tokens: usize,
}

impl<B: Backend> FewShotDetector<B> {
    pub fn new(backend: B, examples: Vec<(String, Verdict)>) -> Result<Self, DetectionError> {
        let has = |v| examples.iter().any(|(_, l)| *l == v);
        if !has(Verdict::Machine) || !has(Verdict::Original) {
            return Err(DetectionError::ExamplesMissingLabel);
        }
        Ok(Self {
            backend,
            examples,
            budget: crate::generation::DEFAULT_CONTEXT_BUDGET,
            max_new_tokens: 5,
        })
    }
}

fn ask<B: Backend + ?Sized>(backend: &B, prompt: &str, max_new_tokens: usize, detector: String) -> Result<Prediction, DetectionError> {
    let request = CompletionRequest {
        prompt,
        max_new_tokens,
        temperature: 0.0,
        seed: 0,
    };
    let completion = backend.complete(&request).map_err(|e| DetectionError::Backend {
        backend: backend.identity(),
        message: match e {
            BackendError::Transient(m) | BackendError::Permanent(m) => m,
        },
    })?;
    let label = parse_label(&completion).ok_or(DetectionError::Unparseable(completion))?;
    Ok(Prediction {
        label,
        confidence: 1.0,
        detector,
    })
}

/// Few-shot verdict on `doc` from `backend`.
pub fn fewshot_detect<B: Backend + ?Sized>(
    backend: &B,
    doc: &str,
    examples: &[(String, Verdict)],
) -> Result<Prediction, DetectionError> {
    let has = |v| examples.iter().any(|(_, l)| *l == v);
    if !has(Verdict::Machine) || !has(Verdict::Original) {
        return Err(DetectionError::ExamplesMissingLabel);
    }
    let prompt = fewshot_prompt(doc, examples, crate::generation::DEFAULT_CONTEXT_BUDGET);
    ask(backend, &prompt, 5, format!("few-shot:{}", backend.identity()))
}

impl<B: Backend> Detector for FewShotDetector<B> {
    fn name(&self) -> String {
        format!("few-shot:{}", self.backend.identity())
    }

    fn predict(&self, text: &str) -> Result<Prediction, DetectionError> {
        let prompt = fewshot_prompt(text, &self.examples, self.budget);
        ask(&self.backend, &prompt, self.max_new_tokens, self.name())
    }
}

/// A remote classifier reached through the backend adapter: the raw text
/// is sent as the prompt and the reply is parsed for a label keyword.
pub struct ExternalDetector<B> {
    pub backend: B,
}

impl<B: Backend> Detector for ExternalDetector<B> {
    fn name(&self) -> String {
        format!("external:{}", self.backend.identity())
    }

    fn predict(&self, text: &str) -> Result<Prediction, DetectionError> {
        ask(&self.backend, text, 5, self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generation::MockBackend;

    fn ws(tokens: &[&str]) -> TokenSeq {
        TokenSeq::from_tokens(tokens.iter().copied(), Scheme::Whitespace)
    }

    fn fv(values: &[f64]) -> FeatureVector {
        FeatureVector {
            values: values.to_vec(),
            oov_ratio: 0.0,
        }
    }

    #[test]
    fn embed_doc_examples() {
        let mut e = EmbeddingTable::new(2);
        e.insert("x", vec![1.0, 0.0]);
        e.insert("y", vec![0.0, 1.0]);
        let f = embed_doc(&ws(&["x", "y"]), &e).unwrap();
        assert_eq!((f.values.as_slice(), f.oov_ratio), (&[0.5, 0.5][..], 0.0));
        let f = embed_doc(&ws(&["x", "zz"]), &e).unwrap();
        assert_eq!((f.values.as_slice(), f.oov_ratio), (&[1.0, 0.0][..], 0.5));
        assert!(matches!(embed_doc(&ws(&["zz"]), &e), Err(DetectionError::AllOutOfVocabulary)));
    }

    #[test]
    fn one_dimensional_fit() {
        let feats = [fv(&[-1.0]), fv(&[-1.0]), fv(&[1.0]), fv(&[1.0])];
        let labels = [Verdict::Machine, Verdict::Machine, Verdict::Original, Verdict::Original];
        let m = train_nb(&feats, &labels, 1e-3).unwrap();
        assert_eq!(m.classes[0].means, vec![-1.0]);
        assert_eq!(m.classes[1].means, vec![1.0]);
        assert_eq!(m.classes[0].variances, vec![1e-3]);
        assert_eq!((m.classes[0].prior, m.classes[1].prior), (0.5, 0.5));
        assert_eq!(m.predict(&fv(&[1.0])).unwrap().label, Verdict::Original);
        assert_eq!(m.predict(&fv(&[-1.0])).unwrap().label, Verdict::Machine);
        let tie = m.predict(&fv(&[0.0])).unwrap();
        assert_eq!((tie.label, tie.confidence), (Verdict::Original, 0.5));
    }

    #[test]
    fn training_errors() {
        let feats = [fv(&[0.0]), fv(&[1.0]), fv(&[2.0])];
        assert!(matches!(
            train_nb(&feats, &[Verdict::Machine; 3], 1e-3),
            Err(DetectionError::MissingClass(Verdict::Original))
        ));
        assert!(matches!(
            train_nb(&feats, &[Verdict::Machine, Verdict::Machine, Verdict::Original], 1e-3),
            Err(DetectionError::ClassTooSmall(Verdict::Original, 1))
        ));
        assert!(matches!(
            train_nb(&feats, &[Verdict::Machine], 1e-3),
            Err(DetectionError::LengthMismatch { .. })
        ));
        assert!(train_nb(&feats, &[Verdict::Machine; 3], 0.0).is_err());
    }

    #[test]
    fn dim_mismatch_on_predict() {
        let feats = [fv(&[0.0]), fv(&[0.1]), fv(&[1.0]), fv(&[1.1])];
        let labels = [Verdict::Machine, Verdict::Machine, Verdict::Original, Verdict::Original];
        let m = train_nb(&feats, &labels, 1e-3).unwrap();
        assert!(matches!(
            m.predict(&fv(&[0.0, 1.0])),
            Err(DetectionError::DimMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn textmatch_examples() {
        let src = ws(&["the", "cat", "sat", "on", "the", "mat"]);
        let index = vec![src.clone()];
        let (p, s) = textmatch_detect(&src, &index, 0.5, 3).unwrap();
        assert_eq!((p.label, s), (Verdict::Original, 1.0));
        let (p, s) = textmatch_detect(&ws(&["a", "b", "c", "d"]), &index, 0.5, 3).unwrap();
        assert_eq!((p.label, s, p.confidence), (Verdict::Machine, 0.0, 1.0));
        // trigrams: the cat sat | cat sat on | sat on a | on a rug -> 2 of 4 contained
        let (p, s) = textmatch_detect(&ws(&["the", "cat", "sat", "on", "a", "rug"]), &index, 0.5, 3).unwrap();
        assert_eq!((p.label, s), (Verdict::Machine, 0.5));
        let (p, _) = textmatch_detect(&ws(&["the", "cat", "sat", "on", "the", "rug"]), &index, 0.5, 3).unwrap();
        assert_eq!(p.label, Verdict::Original);
        assert!(matches!(textmatch_detect(&src, &[], 0.5, 3), Err(DetectionError::EmptyIndex)));
        assert!(textmatch_detect(&ws(&["a"]), &index, 0.5, 3).is_err());
    }

    #[test]
    fn label_parsing() {
        assert_eq!(parse_label("original"), Some(Verdict::Original));
        assert_eq!(parse_label(" Machine-paraphrased because of x"), Some(Verdict::Machine));
        assert_eq!(parse_label("unoriginal, machine"), Some(Verdict::Machine));
        assert_eq!(parse_label("maybe"), None);
    }

    fn examples() -> Vec<(String, Verdict)> {
        vec![
            ("spun text".into(), Verdict::Machine),
            ("real text".into(), Verdict::Original),
        ]
    }

    #[test]
    fn fewshot_with_mock() {
        let p = fewshot_detect(&MockBackend::fixed("original"), "doc", &examples()).unwrap();
        assert_eq!(p.label, Verdict::Original);
        let p = fewshot_detect(&MockBackend::fixed("machine-paraphrased because…"), "doc", &examples()).unwrap();
        assert_eq!(p.label, Verdict::Machine);
        assert!(matches!(
            fewshot_detect(&MockBackend::fixed("maybe"), "doc", &examples()),
            Err(DetectionError::Unparseable(_))
        ));
        assert!(matches!(
            fewshot_detect(&MockBackend::fixed("original"), "doc", &examples()[..1]),
            Err(DetectionError::ExamplesMissingLabel)
        ));
    }

    #[test]
    fn fewshot_prompt_layout() {
        let p = fewshot_prompt("target text", &examples(), 2048);
        assert_eq!(
            p,
            format!(
                "{FEWSHOT_INSTRUCTION}\n\nText: spun text\nLabel: machine-paraphrased\n\n\
                 Text: real text\nLabel: original\n\nText: target text\nLabel:"
            )
        );
        let tight = fewshot_prompt("target text", &examples(), budget_tokens(FEWSHOT_INSTRUCTION) + 4);
        assert!(!tight.contains("spun"));
    }

    #[test]
    fn random_is_order_independent() {
        let r = RandomDetector { seed: 3 };
        assert_eq!(r.predict("abc").unwrap(), r.predict("abc").unwrap());
        let machines = (0..1000)
            .filter(|i| r.predict(&i.to_string()).unwrap().label == Verdict::Machine)
            .count();
        assert!((430..570).contains(&machines), "{machines}");
    }

    #[test]
    fn multinomial_separates_vocabularies() {
        let docs = [ws(&["a", "a", "b"]), ws(&["a", "b"]), ws(&["x", "y"]), ws(&["y", "y", "x"])];
        let labels = [Verdict::Machine, Verdict::Machine, Verdict::Original, Verdict::Original];
        let m = train_multinomial(&docs, &labels, 1.0).unwrap();
        assert_eq!(m.predict(&ws(&["a"])).unwrap().label, Verdict::Machine);
        assert_eq!(m.predict(&ws(&["y", "x"])).unwrap().label, Verdict::Original);
        // unseen tokens carry no evidence; equal priors tie toward Original
        let p = m.predict(&ws(&["zzz"])).unwrap();
        assert_eq!((p.label, p.confidence), (Verdict::Original, 0.5));
    }

    #[test]
    fn model_file_roundtrip() {
        let feats = [fv(&[0.0, 1.0]), fv(&[0.2, 1.0]), fv(&[1.0, 0.0]), fv(&[1.2, 0.1])];
        let labels = [Verdict::Machine, Verdict::Machine, Verdict::Original, Verdict::Original];
        let m = train_nb(&feats, &labels, 1e-4).unwrap();
        let file = ModelFile::new(DetectorModel::GaussianNb(m), Scheme::default(), Some("abc".into()));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        file.save(&path).unwrap();
        assert_eq!(ModelFile::load(&path).unwrap(), file);
        std::fs::write(&path, "{\"format\":\"x\"}").unwrap();
        assert!(ModelFile::load(&path).is_err());
    }
}
