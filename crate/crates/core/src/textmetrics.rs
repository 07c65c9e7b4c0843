//! Similarity scores used for candidate selection, detection and analysis.
//!
//! Every score is a [`UnitScore`] in `[0, 1]`. Inputs are [`TokenSeq`]s
//! produced by [`tokenize`]; comparing sequences built with different
//! tokenization schemes is rejected.

use std::collections::HashMap;
use std::fmt;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("text is empty after tokenization")]
    EmptyAfterTokenization,
    #[error("{0} input is empty")]
    EmptyInput(&'static str),
    #[error("token sequences use different schemes ({0} vs {1})")]
    SchemeMismatch(Scheme, Scheme),
    #[error("max_n must be in 1..=4, got {0}")]
    InvalidOrder(usize),
    #[error("candidate has {len} tokens, shorter than n = {n}")]
    TooShort { len: usize, n: usize },
    #[error("no in-vocabulary token in the {0}")]
    NoInVocabulary(&'static str),
    #[error("embedding file line {line}: {message}")]
    EmbeddingFormat { line: usize, message: String },
    #[error("embedding io: {0}")]
    Io(String),
}

/// Tokenization scheme recorded on every [`TokenSeq`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Whitespace,
    #[default]
    WhitespaceLowerNopunct,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Whitespace => f.write_str("whitespace"),
            Scheme::WhitespaceLowerNopunct => f.write_str("whitespace-lower-nopunct"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TokenSeq {
    tokens: Vec<String>,
    scheme: Scheme,
}

impl TokenSeq {
    /// Builds a sequence from pre-split tokens. Tokens are taken as-is.
    pub fn from_tokens<I, S>(tokens: I, scheme: Scheme) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            tokens: tokens.into_iter().map(Into::into).collect(),
            scheme,
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Strips leading and trailing punctuation from a token.
pub(crate) fn trim_punct(token: &str) -> &str {
    token.trim_matches(|c: char| c.is_ascii_punctuation() || is_unicode_punct(c))
}

fn is_unicode_punct(c: char) -> bool {
    matches!(
        c,
        '“' | '”' | '‘' | '’' | '«' | '»' | '…' | '–' | '—' | '¿' | '¡' | '·' | '„' | '‚'
    )
}

/// Splits `text` into tokens under `scheme`.
///
/// Returns [`MetricError::EmptyAfterTokenization`] when nothing survives,
/// e.g. for whitespace-only input or punctuation-only input under
/// [`Scheme::WhitespaceLowerNopunct`].
pub fn tokenize(text: &str, scheme: Scheme) -> Result<TokenSeq, MetricError> {
    let tokens: Vec<String> = match scheme {
        Scheme::Whitespace => text.split_whitespace().map(str::to_owned).collect(),
        Scheme::WhitespaceLowerNopunct => text
            .split_whitespace()
            .map(|t| trim_punct(t).to_lowercase())
            .filter(|t| !t.is_empty())
            .collect(),
    };
    if tokens.is_empty() {
        return Err(MetricError::EmptyAfterTokenization);
    }
    Ok(TokenSeq { tokens, scheme })
}

/// Identifies which metric produced a [`UnitScore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricId {
    Bleu,
    RougeL,
    SemMatch,
    LmLike,
    TextMatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitScore {
    value: f64,
    metric: MetricId,
}

impl UnitScore {
    /// Clamps tiny floating overshoots into `[0, 1]`.
    pub fn new(metric: MetricId, value: f64) -> Self {
        debug_assert!(value.is_finite(), "{metric:?} produced {value}");
        Self {
            value: value.clamp(0.0, 1.0),
            metric,
        }
    }

    pub fn value(self) -> f64 {
        self.value
    }

    pub fn metric(self) -> MetricId {
        self.metric
    }
}

fn check_pair(candidate: &TokenSeq, reference: &TokenSeq) -> Result<(), MetricError> {
    if candidate.is_empty() {
        return Err(MetricError::EmptyInput("candidate"));
    }
    if reference.is_empty() {
        return Err(MetricError::EmptyInput("reference"));
    }
    if candidate.scheme != reference.scheme {
        return Err(MetricError::SchemeMismatch(candidate.scheme, reference.scheme));
    }
    Ok(())
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Clipped n-gram matches of `candidate` against `reference`, plus the
/// candidate's total n-gram count.
fn clipped_matches(candidate: &[String], reference: &[String], n: usize) -> (usize, usize) {
    let cand = ngram_counts(candidate, n);
    let refc = ngram_counts(reference, n);
    let matched = cand
        .iter()
        .map(|(gram, &c)| c.min(refc.get(gram).copied().unwrap_or(0)))
        .sum();
    (matched, (candidate.len() + 1).saturating_sub(n))
}

/// Unsmoothed sentence BLEU with the standard brevity penalty.
///
/// Orders above the candidate length have zero precision, which makes the
/// score 0.
pub fn bleu(candidate: &TokenSeq, reference: &TokenSeq, max_n: usize) -> Result<UnitScore, MetricError> {
    check_pair(candidate, reference)?;
    if !(1..=4).contains(&max_n) {
        return Err(MetricError::InvalidOrder(max_n));
    }
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        if candidate.len() < n {
            return Ok(UnitScore::new(MetricId::Bleu, 0.0));
        }
        let (matched, total) = clipped_matches(&candidate.tokens, &reference.tokens, n);
        if matched == 0 {
            return Ok(UnitScore::new(MetricId::Bleu, 0.0));
        }
        log_sum += (matched as f64 / total as f64).ln();
    }
    let c = candidate.len() as f64;
    let r = reference.len() as f64;
    let bp = if c < r { (1.0 - r / c).exp() } else { 1.0 };
    Ok(UnitScore::new(MetricId::Bleu, bp * (log_sum / max_n as f64).exp()))
}

/// Length of the longest common subsequence, O(n·m) time and O(m) space.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F1 over the longest common subsequence.
pub fn rouge_l(candidate: &TokenSeq, reference: &TokenSeq) -> Result<UnitScore, MetricError> {
    check_pair(candidate, reference)?;
    let lcs = lcs_len(&candidate.tokens, &reference.tokens);
    if lcs == 0 {
        return Ok(UnitScore::new(MetricId::RougeL, 0.0));
    }
    let p = lcs as f64 / candidate.len() as f64;
    let r = lcs as f64 / reference.len() as f64;
    Ok(UnitScore::new(MetricId::RougeL, 2.0 * p * r / (p + r)))
}

/// Static word embeddings keyed by token.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dim must be positive");
        Self {
            dim,
            vectors: HashMap::new(),
        }
    }

    /// Inserts or replaces a vector. Panics when the length differs from `dim`.
    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<f64>) {
        assert_eq!(vector.len(), self.dim, "embedding length mismatch");
        self.vectors.insert(token.into(), vector);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// `None` is a miss; a stored zero vector is returned as-is.
    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    /// Parses the plain-text format: an optional `<count> <dim>` header,
    /// then `token v1 .. vdim` per line.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, MetricError> {
        let mut table: Option<EmbeddingTable> = None;
        let mut expected_count = None;
        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| MetricError::Io(e.to_string()))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if idx == 0 && fields.len() == 2 {
                if let (Ok(count), Ok(dim)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                    if dim == 0 {
                        return Err(MetricError::EmbeddingFormat {
                            line: lineno,
                            message: "dim must be positive".into(),
                        });
                    }
                    expected_count = Some(count);
                    table = Some(EmbeddingTable::new(dim));
                    continue;
                }
            }
            let token = fields[0];
            let values = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<Result<Vec<f64>, _>>()
                .map_err(|e| MetricError::EmbeddingFormat {
                    line: lineno,
                    message: format!("bad float: {e}"),
                })?;
            if values.is_empty() {
                return Err(MetricError::EmbeddingFormat {
                    line: lineno,
                    message: "token has no vector".into(),
                });
            }
            let table = table.get_or_insert_with(|| EmbeddingTable::new(values.len()));
            if values.len() != table.dim {
                return Err(MetricError::EmbeddingFormat {
                    line: lineno,
                    message: format!("expected {} values, found {}", table.dim, values.len()),
                });
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(MetricError::EmbeddingFormat {
                    line: lineno,
                    message: "non-finite value".into(),
                });
            }
            table.vectors.insert(token.to_owned(), values);
        }
        let table = table.ok_or(MetricError::EmbeddingFormat {
            line: 0,
            message: "no vectors".into(),
        })?;
        if let Some(count) = expected_count {
            if count != table.len() {
                return Err(MetricError::EmbeddingFormat {
                    line: 1,
                    message: format!("header declares {count} vectors, found {}", table.len()),
                });
            }
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MetricError> {
        let file = std::fs::File::open(path.as_ref()).map_err(|e| MetricError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    /// Writes the table with a header, tokens sorted for reproducible output.
    pub fn write_to<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.len(), self.dim)?;
        let mut tokens: Vec<&String> = self.vectors.keys().collect();
        tokens.sort();
        for token in tokens {
            write!(out, "{token}")?;
            for v in &self.vectors[token] {
                write!(out, " {v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// SHA-256 over the serialized table; identifies the embedding space a
    /// model was trained against.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to Vec cannot fail");
        hex::encode(Sha256::digest(&buf))
    }
}

/// Cosine similarity clipped to `[0, 1]`; zero vectors give 0.
pub fn clipped_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(0.0, 1.0)
}

/// Greedy-matching F-score over static embeddings.
///
/// Recall averages, over reference tokens, the best cosine against any
/// candidate token; precision is the mirror image. Out-of-vocabulary tokens
/// are skipped on both sides.
pub fn sem_match(
    candidate: &TokenSeq,
    reference: &TokenSeq,
    emb: &EmbeddingTable,
) -> Result<UnitScore, MetricError> {
    check_pair(candidate, reference)?;
    let cand: Vec<&[f64]> = candidate.tokens.iter().filter_map(|t| emb.get(t)).collect();
    let refv: Vec<&[f64]> = reference.tokens.iter().filter_map(|t| emb.get(t)).collect();
    if cand.is_empty() {
        return Err(MetricError::NoInVocabulary("candidate"));
    }
    if refv.is_empty() {
        return Err(MetricError::NoInVocabulary("reference"));
    }
    let sims: Vec<Vec<f64>> = cand
        .iter()
        .map(|c| refv.iter().map(|r| clipped_cosine(c, r)).collect())
        .collect();
    let precision = sims
        .iter()
        .map(|row| row.iter().copied().fold(0.0, f64::max))
        .sum::<f64>()
        / cand.len() as f64;
    let recall = (0..refv.len())
        .map(|j| sims.iter().map(|row| row[j]).fold(0.0, f64::max))
        .sum::<f64>()
        / refv.len() as f64;
    let f = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(UnitScore::new(MetricId::SemMatch, f))
}

const BOS: &str = "\u{0}<s>";

/// Likelihood proxy: add-one smoothed n-gram model estimated on the
/// reference, evaluated on the candidate, reported as the geometric mean
/// token probability.
///
/// `P(w | h) = (c(h, w) + 1) / (c(h) + V)` where `V` counts distinct tokens
/// of reference and candidate together, and histories are padded with
/// `order - 1` start symbols. With `order = 1` the history is empty and
/// `c(h)` is the reference length.
pub fn lm_like(candidate: &TokenSeq, reference: &TokenSeq, order: usize) -> Result<UnitScore, MetricError> {
    check_pair(candidate, reference)?;
    if order == 0 {
        return Err(MetricError::InvalidOrder(order));
    }
    let vocab: std::collections::HashSet<&str> = reference
        .tokens
        .iter()
        .chain(candidate.tokens.iter())
        .map(String::as_str)
        .collect();
    let v = vocab.len() as f64;

    let pad = |tokens: &[String]| -> Vec<String> {
        std::iter::repeat_n(BOS.to_owned(), order - 1)
            .chain(tokens.iter().cloned())
            .collect()
    };
    let ref_padded = pad(&reference.tokens);
    let mut joint: HashMap<&[String], usize> = HashMap::new();
    let mut history: HashMap<&[String], usize> = HashMap::new();
    for gram in ref_padded.windows(order) {
        *joint.entry(gram).or_insert(0) += 1;
        *history.entry(&gram[..order - 1]).or_insert(0) += 1;
    }

    let cand_padded = pad(&candidate.tokens);
    let mut log_prob = 0.0;
    for gram in cand_padded.windows(order) {
        let c_hw = joint.get(gram).copied().unwrap_or(0) as f64;
        let c_h = history.get(&gram[..order - 1]).copied().unwrap_or(0) as f64;
        log_prob += ((c_hw + 1.0) / (c_h + v)).ln();
    }
    let mean = log_prob / candidate.len() as f64;
    Ok(UnitScore::new(MetricId::LmLike, mean.exp()))
}

/// Fraction of candidate n-grams contained in the reference, with each
/// reference n-gram usable as many times as it occurs there.
pub fn text_match(candidate: &TokenSeq, reference: &TokenSeq, n: usize) -> Result<UnitScore, MetricError> {
    check_pair(candidate, reference)?;
    if n == 0 {
        return Err(MetricError::InvalidOrder(n));
    }
    if candidate.len() < n {
        return Err(MetricError::TooShort {
            len: candidate.len(),
            n,
        });
    }
    let (matched, total) = clipped_matches(&candidate.tokens, &reference.tokens, n);
    Ok(UnitScore::new(MetricId::TextMatch, matched as f64 / total as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ws(tokens: &[&str]) -> TokenSeq {
        TokenSeq::from_tokens(tokens.iter().copied(), Scheme::Whitespace)
    }

    #[test]
    fn tokenize_schemes() {
        assert_eq!(tokenize("The cat.", Scheme::Whitespace).unwrap().tokens(), ["The", "cat."]);
        assert_eq!(
            tokenize("The cat.", Scheme::WhitespaceLowerNopunct).unwrap().tokens(),
            ["the", "cat"]
        );
        assert_eq!(tokenize("  a  b ", Scheme::Whitespace).unwrap().tokens(), ["a", "b"]);
        assert_eq!(
            tokenize("“Quoted,” she said…", Scheme::WhitespaceLowerNopunct).unwrap().tokens(),
            ["quoted", "she", "said"]
        );
    }

    #[test]
    fn tokenize_empty_is_error() {
        assert_eq!(tokenize("   ", Scheme::Whitespace), Err(MetricError::EmptyAfterTokenization));
        assert_eq!(
            tokenize(" ... !! ", Scheme::WhitespaceLowerNopunct),
            Err(MetricError::EmptyAfterTokenization)
        );
    }

    #[test]
    fn bleu_examples() {
        let abc = ws(&["a", "b", "c"]);
        assert_eq!(bleu(&abc, &abc, 2).unwrap().value(), 1.0);
        assert_eq!(bleu(&ws(&["x", "y", "z"]), &abc, 1).unwrap().value(), 0.0);
        let got = bleu(&abc, &ws(&["a", "b", "d"]), 2).unwrap().value();
        assert!((got - (2.0f64 / 3.0 * 0.5).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn bleu_brevity_and_short_candidates() {
        let r = ws(&["a", "b", "c", "d"]);
        let c = ws(&["a", "b"]);
        let got = bleu(&c, &r, 1).unwrap().value();
        assert!((got - (1.0f64 - 2.0).exp()).abs() < 1e-12);
        // order 3 does not exist in a 2-token candidate
        assert_eq!(bleu(&c, &r, 3).unwrap().value(), 0.0);
        assert_eq!(bleu(&c, &r, 5), Err(MetricError::InvalidOrder(5)));
        assert_eq!(bleu(&ws(&[]), &r, 1), Err(MetricError::EmptyInput("candidate")));
    }

    #[test]
    fn bleu_clips_repeated_ngrams() {
        let got = bleu(&ws(&["the", "the", "the"]), &ws(&["the", "cat", "sat"]), 1).unwrap();
        assert!((got.value() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn rouge_examples() {
        let abcd = ws(&["a", "b", "c", "d"]);
        assert_eq!(rouge_l(&abcd, &abcd).unwrap().value(), 1.0);
        assert_eq!(rouge_l(&ws(&["x"]), &abcd).unwrap().value(), 0.0);
        assert!((rouge_l(&abcd, &ws(&["a", "c", "b", "d"])).unwrap().value() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn scheme_mismatch_rejected() {
        let a = TokenSeq::from_tokens(["a"], Scheme::Whitespace);
        let b = TokenSeq::from_tokens(["a"], Scheme::WhitespaceLowerNopunct);
        assert!(matches!(rouge_l(&a, &b), Err(MetricError::SchemeMismatch(..))));
    }

    fn emb2() -> EmbeddingTable {
        // cos(v, w) = 0.5, u orthogonal to both
        let mut e = EmbeddingTable::new(3);
        e.insert("u", vec![1.0, 0.0, 0.0]);
        e.insert("v", vec![0.0, 1.0, 0.0]);
        e.insert("w", vec![0.0, 0.5, 0.75f64.sqrt()]);
        e
    }

    #[test]
    fn sem_match_examples() {
        let e = emb2();
        let uv = ws(&["u", "v"]);
        assert!((sem_match(&uv, &uv, &e).unwrap().value() - 1.0).abs() < 1e-12);
        let got = sem_match(&uv, &ws(&["u", "w"]), &e).unwrap().value();
        assert!((got - 0.75).abs() < 1e-12, "{got}");
        let mut orth = EmbeddingTable::new(2);
        orth.insert("a", vec![1.0, 0.0]);
        orth.insert("b", vec![0.0, 1.0]);
        assert_eq!(sem_match(&ws(&["a"]), &ws(&["b"]), &orth).unwrap().value(), 0.0);
    }

    #[test]
    fn sem_match_oov() {
        let e = emb2();
        assert_eq!(
            sem_match(&ws(&["zz"]), &ws(&["u"]), &e),
            Err(MetricError::NoInVocabulary("candidate"))
        );
        assert_eq!(
            sem_match(&ws(&["u"]), &ws(&["zz"]), &e),
            Err(MetricError::NoInVocabulary("reference"))
        );
        // OOV tokens are skipped rather than scored as zero vectors
        assert_eq!(sem_match(&ws(&["u", "zz"]), &ws(&["u"]), &e).unwrap().value(), 1.0);
    }

    #[test]
    fn sem_match_clips_negative_cosine() {
        let mut e = EmbeddingTable::new(1);
        e.insert("p", vec![1.0]);
        e.insert("n", vec![-1.0]);
        assert_eq!(sem_match(&ws(&["p"]), &ws(&["n"]), &e).unwrap().value(), 0.0);
    }

    #[test]
    fn lm_like_examples() {
        // reference [a, b], candidate [c, d]: N = 2, V = 4, every token gets 1/6
        let floor = lm_like(&ws(&["c", "d"]), &ws(&["a", "b"]), 1).unwrap().value();
        assert!((floor - 1.0 / 6.0).abs() < 1e-12);
        // identical: each token (1 + 1) / (2 + 2) = 1/2
        let max = lm_like(&ws(&["a", "b"]), &ws(&["a", "b"]), 1).unwrap().value();
        assert!((max - 0.5).abs() < 1e-12);
        // one shared token: V = 3, probs 2/5 and 1/5, geometric mean sqrt(2)/5
        let mid = lm_like(&ws(&["a", "c"]), &ws(&["a", "b"]), 1).unwrap().value();
        assert!((mid - 2f64.sqrt() / 5.0).abs() < 1e-12);
        assert!(mid > 1.0 / 5.0 && mid < max);
    }

    #[test]
    fn lm_like_bigram_prefers_order() {
        let r = ws(&["a", "b", "c"]);
        let same = lm_like(&r, &r, 2).unwrap().value();
        let shuffled = lm_like(&ws(&["c", "b", "a"]), &r, 2).unwrap().value();
        assert!(same > shuffled);
        assert_eq!(lm_like(&r, &r, 0), Err(MetricError::InvalidOrder(0)));
    }

    #[test]
    fn text_match_examples() {
        let abcd = ws(&["a", "b", "c", "d"]);
        assert_eq!(text_match(&abcd, &abcd, 3).unwrap().value(), 1.0);
        assert_eq!(text_match(&ws(&["x", "y"]), &abcd, 1).unwrap().value(), 0.0);
        let got = text_match(&abcd, &ws(&["a", "b", "x", "y"]), 2).unwrap().value();
        assert!((got - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(
            text_match(&ws(&["a"]), &abcd, 2),
            Err(MetricError::TooShort { len: 1, n: 2 })
        );
    }

    #[test]
    fn embedding_file_roundtrip_and_errors() {
        let text = "2 2\nhello 1.0 0.0\nworld 0 1\n";
        let e = EmbeddingTable::from_reader(text.as_bytes()).unwrap();
        assert_eq!(e.dim(), 2);
        assert_eq!(e.get("world"), Some(&[0.0, 1.0][..]));
        assert_eq!(e.get("missing"), None);
        let mut buf = Vec::new();
        e.write_to(&mut buf).unwrap();
        assert_eq!(EmbeddingTable::from_reader(&buf[..]).unwrap(), e);

        let headerless = EmbeddingTable::from_reader("a 1 2 3\nb 4 5 6\n".as_bytes()).unwrap();
        assert_eq!(headerless.dim(), 3);

        let err = EmbeddingTable::from_reader("a 1 2\nb 1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, MetricError::EmbeddingFormat { line: 2, .. }));
        let err = EmbeddingTable::from_reader("3 2\na 1 2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, MetricError::EmbeddingFormat { line: 1, .. }));
        let err = EmbeddingTable::from_reader("a 1 x\n".as_bytes()).unwrap_err();
        assert!(matches!(err, MetricError::EmbeddingFormat { line: 1, .. }));
    }
}
