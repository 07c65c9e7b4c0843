//! Aligned original/paraphrase corpora: data model, ingestion, assembly and
//! persistence.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::generation::{self, Backend, GenParams, Generation, GenerationError, PromptSpec};
use crate::selection::{self, CandidateSet, MetricVector, Scorer, SelectionWeights};
use crate::textmetrics::MetricError;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{file}:{line}: {message}")]
    Malformed { file: String, line: usize, message: String },
    #[error("{file}:{line}: duplicate document id {id}")]
    DuplicateId { file: String, line: usize, id: String },
    #[error("invalid document id {0:?}; expected <doc>-<ORIG|SPUN>-<para>")]
    InvalidId(String),
    #[error("unknown document {0}")]
    UnknownDocument(String),
    #[error("no originals to paraphrase")]
    NoOriginals,
    #[error("{failed} of {total} documents failed, above the allowed rate {max_rate}; first: {first}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        max_rate: f64,
        first: String,
    },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("pair {0}: {1}")]
    Inconsistent(String, String),
    #[error("metric: {0}")]
    Metric(#[from] MetricError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Arxiv,
    Wikipedia,
    Theses,
    Other,
}

impl Source {
    pub const ALL: [Source; 4] = [Source::Arxiv, Source::Wikipedia, Source::Theses, Source::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::Arxiv => "arxiv",
            Source::Wikipedia => "wikipedia",
            Source::Theses => "theses",
            Source::Other => "other",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Source::ALL
            .into_iter()
            .find(|src| src.as_str() == s)
            .ok_or_else(|| format!("unknown source {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DocKind {
    Orig,
    Spun,
}

/// Parsed `<doc>-<ORIG|SPUN>-<para>` coordinates, e.g. `3747-ORIG-44`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DocId {
    pub doc: String,
    pub kind: DocKind,
    pub para: String,
}

impl DocId {
    pub fn parse(id: &str) -> Result<Self, CorpusError> {
        let invalid = || CorpusError::InvalidId(id.to_owned());
        let (rest, para) = id.rsplit_once('-').ok_or_else(invalid)?;
        let (doc, kind) = rest.rsplit_once('-').ok_or_else(invalid)?;
        let kind = match kind {
            "ORIG" => DocKind::Orig,
            "SPUN" => DocKind::Spun,
            _ => return Err(invalid()),
        };
        if doc.is_empty() || para.is_empty() || doc.contains(char::is_whitespace) || para.contains(char::is_whitespace) {
            return Err(invalid());
        }
        Ok(Self {
            doc: doc.to_owned(),
            kind,
            para: para.to_owned(),
        })
    }

    pub fn with_kind(&self, kind: DocKind) -> Self {
        Self { kind, ..self.clone() }
    }
}

impl fmt::Display for DocId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            DocKind::Orig => "ORIG",
            DocKind::Spun => "SPUN",
        };
        write!(f, "{}-{kind}-{}", self.doc, self.para)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub id: String,
    pub source: Source,
    pub text: String,
}

impl Document {
    pub fn new(id: impl Into<String>, source: Source, text: impl Into<String>) -> Result<Self, CorpusError> {
        let doc = Self {
            id: id.into(),
            source,
            text: text.into(),
        };
        DocId::parse(&doc.id)?;
        if doc.text.trim().is_empty() {
            return Err(CorpusError::Inconsistent(doc.id, "text is empty".into()));
        }
        Ok(doc)
    }

    pub fn doc_id(&self) -> DocId {
        DocId::parse(&self.id).expect("validated on construction")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairLabel {
    Machine,
    Human,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPair {
    pub original: Document,
    pub paraphrase: Document,
    /// `<backend identity>#<params digest>`; absent for human pairs.
    pub generator: Option<String>,
    pub label: PairLabel,
    pub metrics: MetricVector,
}

/// Serialized form of an [`AlignedPair`] in `pairs.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairRecord {
    pub original_id: String,
    pub paraphrase_id: String,
    pub label: PairLabel,
    pub generator: Option<String>,
    pub metrics: MetricVector,
}

impl AlignedPair {
    pub fn id(&self) -> &str {
        &self.original.id
    }

    pub fn record(&self) -> PairRecord {
        PairRecord {
            original_id: self.original.id.clone(),
            paraphrase_id: self.paraphrase.id.clone(),
            label: self.label,
            generator: self.generator.clone(),
            metrics: self.metrics,
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let o = self.original.doc_id();
        let p = self.paraphrase.doc_id();
        if o.doc != p.doc || o.para != p.para {
            return Err(CorpusError::Inconsistent(
                self.original.id.clone(),
                format!("paraphrase {} has different coordinates", self.paraphrase.id),
            ));
        }
        if self.label == PairLabel::Human && self.generator.is_some() {
            return Err(CorpusError::Inconsistent(
                self.original.id.clone(),
                "human pairs carry no generator".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IngestFormat {
    Jsonl,
    PairedDirs,
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>, CorpusError> {
    let file = fs::File::open(path)?;
    let name = path.display().to_string();
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            file: name.clone(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push((idx + 1, value));
    }
    Ok(out)
}

pub(crate) fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut out, &item)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Reads documents in file order, rejecting malformed ids and duplicates.
///
/// `paired-dirs` expects `<path>/<source>/<id>.txt`, one paragraph per file;
/// sources are visited in name order and files in name order.
pub fn ingest(path: impl AsRef<Path>, format: IngestFormat) -> Result<Vec<Document>, CorpusError> {
    let path = path.as_ref();
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    let mut push = |doc: Document, file: String, line: usize, docs: &mut Vec<Document>| {
        if !seen.insert(doc.id.clone()) {
            return Err(CorpusError::DuplicateId {
                file,
                line,
                id: doc.id,
            });
        }
        docs.push(doc);
        Ok(())
    };
    match format {
        IngestFormat::Jsonl => {
            let name = path.display().to_string();
            for (line, doc) in read_jsonl::<Document>(path)? {
                let doc = Document::new(doc.id, doc.source, doc.text).map_err(|e| CorpusError::Malformed {
                    file: name.clone(),
                    line,
                    message: e.to_string(),
                })?;
                push(doc, name.clone(), line, &mut docs)?;
            }
        }
        IngestFormat::PairedDirs => {
            let mut dirs: Vec<PathBuf> = fs::read_dir(path)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_dir())
                .collect();
            dirs.sort();
            for dir in dirs {
                let dir_name = dir.file_name().and_then(|n| n.to_str()).unwrap_or_default();
                let source: Source = dir_name.parse().map_err(|message| CorpusError::Malformed {
                    file: dir.display().to_string(),
                    line: 0,
                    message,
                })?;
                let mut files: Vec<PathBuf> = fs::read_dir(&dir)?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.extension().is_some_and(|x| x == "txt"))
                    .collect();
                files.sort();
                for file in files {
                    let name = file.display().to_string();
                    let id = file.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_owned();
                    let text = fs::read_to_string(&file)?;
                    let doc = Document::new(id, source, text.trim()).map_err(|e| CorpusError::Malformed {
                        file: name.clone(),
                        line: 0,
                        message: e.to_string(),
                    })?;
                    push(doc, name, 0, &mut docs)?;
                }
            }
        }
    }
    Ok(docs)
}

/// Documents plus the pairs that reference them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub pairs: Vec<AlignedPair>,
}

pub const DOCUMENTS_FILE: &str = "documents.jsonl";
pub const PAIRS_FILE: &str = "pairs.jsonl";

impl Corpus {
    pub fn new(pairs: Vec<AlignedPair>) -> Self {
        Self { pairs }
    }

    /// Originals followed by paraphrases, each group in pair order.
    pub fn documents(&self) -> Vec<&Document> {
        self.pairs
            .iter()
            .map(|p| &p.original)
            .chain(self.pairs.iter().map(|p| &p.paraphrase))
            .collect()
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), CorpusError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        write_jsonl(&dir.join(DOCUMENTS_FILE), self.documents())?;
        write_jsonl(&dir.join(PAIRS_FILE), self.pairs.iter().map(AlignedPair::record))?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let dir = dir.as_ref();
        let docs: HashMap<String, Document> = ingest(dir.join(DOCUMENTS_FILE), IngestFormat::Jsonl)?
            .into_iter()
            .map(|d| (d.id.clone(), d))
            .collect();
        let name = dir.join(PAIRS_FILE).display().to_string();
        let mut pairs = Vec::new();
        for (line, rec) in read_jsonl::<PairRecord>(&dir.join(PAIRS_FILE))? {
            let lookup = |id: &str| {
                docs.get(id).cloned().ok_or_else(|| CorpusError::Malformed {
                    file: name.clone(),
                    line,
                    message: format!("unknown document {id}"),
                })
            };
            let pair = AlignedPair {
                original: lookup(&rec.original_id)?,
                paraphrase: lookup(&rec.paraphrase_id)?,
                generator: rec.generator,
                label: rec.label,
                metrics: rec.metrics,
            };
            pair.validate().map_err(|e| CorpusError::Malformed {
                file: name.clone(),
                line,
                message: e.to_string(),
            })?;
            pairs.push(pair);
        }
        Ok(Self { pairs })
    }
}

/// Run-level provenance digest over backend identity, prompt template and
/// generation parameters.
pub fn provenance_digest(backend: &str, spec: &PromptSpec, params: &GenParams) -> String {
    let mut h = Sha256::new();
    h.update(backend.as_bytes());
    h.update([0]);
    h.update(spec.instruction.as_bytes());
    for pair in &spec.example_pairs {
        h.update([0]);
        h.update(pair.original.as_bytes());
        h.update([0]);
        h.update(pair.paraphrased.as_bytes());
    }
    h.update(spec.context_budget_tokens.to_le_bytes());
    h.update(serde_json::to_vec(params).expect("params serialize"));
    hex::encode(h.finalize())
}

pub fn generator_tag(backend: &str, spec: &PromptSpec, params: &GenParams) -> String {
    format!("{backend}#{}", &provenance_digest(backend, spec, params)[..16])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BuildOptions {
    /// Fraction of originals allowed to fail before the run fails.
    pub max_error_rate: f64,
    /// Concurrent backend calls.
    pub max_in_flight: usize,
    pub weights: SelectionWeights,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            max_error_rate: 0.0,
            max_in_flight: 4,
            weights: SelectionWeights::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocFailure {
    pub id: String,
    pub message: String,
}

fn pool(max_in_flight: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(max_in_flight.max(1))
        .build()
        .expect("thread pool")
}

/// Seed for one original: the run seed mixed with a hash of the id, so a
/// document's candidates do not depend on its position in the input.
fn doc_seed(seed: u64, id: &str) -> u64 {
    let h = Sha256::digest(id.as_bytes());
    generation::mix_seed(seed, u64::from_le_bytes(h[..8].try_into().expect("8 bytes")), 0)
}

/// Generates candidates for every original, in parallel up to
/// `max_in_flight`. Results come back in input order.
pub fn generate_all<B: Backend + ?Sized>(
    originals: &[Document],
    backend: &B,
    params: &GenParams,
    spec: &PromptSpec,
    max_in_flight: usize,
) -> Vec<Result<Generation, GenerationError>> {
    pool(max_in_flight).install(|| {
        originals
            .par_iter()
            .map(|doc| {
                let params = GenParams {
                    seed: doc_seed(params.seed, &doc.id),
                    ..params.clone()
                };
                generation::paraphrase(backend, &doc.text, &params, spec)
            })
            .collect()
    })
}

/// Scores candidates and keeps the selected one as a machine pair.
pub fn select_pair(
    original: &Document,
    candidates: &[String],
    generator: &str,
    scorer: &Scorer,
    weights: &SelectionWeights,
) -> Result<(AlignedPair, CandidateSet), CorpusError> {
    let set = CandidateSet::score(original.id.clone(), &original.text, candidates, scorer)?;
    let winner = selection::select_index(&set.vectors(), weights)
        .ok_or_else(|| CorpusError::Inconsistent(original.id.clone(), "no candidates".into()))?;
    let chosen = &set.candidates[winner];
    let paraphrase = Document {
        id: original.doc_id().with_kind(DocKind::Spun).to_string(),
        source: original.source,
        text: chosen.text.clone(),
    };
    let pair = AlignedPair {
        original: original.clone(),
        paraphrase,
        generator: Some(generator.to_owned()),
        label: PairLabel::Machine,
        metrics: chosen.metrics,
    };
    Ok((pair, set))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildOutcome {
    /// Sorted by original id.
    pub pairs: Vec<AlignedPair>,
    pub failures: Vec<DocFailure>,
}

pub(crate) fn check_failures(failures: &[DocFailure], total: usize, max_rate: f64) -> Result<(), CorpusError> {
    if !failures.is_empty() && failures.len() as f64 / total as f64 > max_rate {
        return Err(CorpusError::TooManyFailures {
            failed: failures.len(),
            total,
            max_rate,
            first: format!("{}: {}", failures[0].id, failures[0].message),
        });
    }
    Ok(())
}

/// Generate, score, select and assemble one machine pair per original.
///
/// Per-document errors are collected; the run fails only when their share
/// exceeds `options.max_error_rate`.
pub fn build_pairs<B: Backend + ?Sized>(
    originals: &[Document],
    backend: &B,
    params: &GenParams,
    spec: &PromptSpec,
    scorer: &Scorer,
    options: &BuildOptions,
) -> Result<BuildOutcome, CorpusError> {
    if originals.is_empty() {
        return Err(CorpusError::NoOriginals);
    }
    let generator = generator_tag(&backend.identity(), spec, params);
    let generations = generate_all(originals, backend, params, spec, options.max_in_flight);
    let results: Vec<Result<AlignedPair, DocFailure>> = pool(options.max_in_flight).install(|| {
        originals
            .par_iter()
            .zip(generations)
            .map(|(doc, generated)| {
                let fail = |message: String| DocFailure {
                    id: doc.id.clone(),
                    message,
                };
                let generated = generated.map_err(|e| fail(e.to_string()))?;
                select_pair(doc, &generated.candidates, &generator, scorer, &options.weights)
                    .map(|(pair, _)| pair)
                    .map_err(|e| fail(e.to_string()))
            })
            .collect()
    });
    let mut pairs = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(p) => pairs.push(p),
            Err(f) => failures.push(f),
        }
    }
    check_failures(&failures, originals.len(), options.max_error_rate)?;
    pairs.sort_by(|a, b| a.original.id.cmp(&b.original.id));
    failures.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(BuildOutcome { pairs, failures })
}

/// Recomputes the metric vector of each `stride`-th pair and reports the
/// ids whose stored vector differs by more than `tol` on any axis.
pub fn verify_metrics(pairs: &[AlignedPair], scorer: &Scorer, stride: usize, tol: f64) -> Result<Vec<String>, CorpusError> {
    let mut bad = Vec::new();
    for pair in pairs.iter().step_by(stride.max(1)) {
        let v = scorer.score_text(&pair.paraphrase.text, &pair.original.text)?;
        let stored = pair.metrics;
        let diff = [
            v.sem_match - stored.sem_match,
            v.lm_like - stored.lm_like,
            v.rouge_l - stored.rouge_l,
            v.bleu - stored.bleu,
        ];
        if diff.iter().any(|d| d.abs() > tol) {
            bad.push(pair.id().to_owned());
        }
    }
    Ok(bad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
    pub seed: u64,
    pub ratios: [f64; 3],
}

impl CorpusSplit {
    pub fn part_of(&self, id: &str) -> Option<&'static str> {
        if self.train.iter().any(|x| x == id) {
            Some("train")
        } else if self.dev.iter().any(|x| x == id) {
            Some("dev")
        } else if self.test.iter().any(|x| x == id) {
            Some("test")
        } else {
            None
        }
    }
}

/// Part sizes by largest-remainder rounding; ties go to the earlier part.
pub fn split_sizes(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut sizes: [usize; 3] = [0; 3];
    for i in 0..3 {
        sizes[i] = exact[i].floor() as usize;
    }
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).expect("finite").then(a.cmp(&b))
    });
    let assigned: usize = sizes.iter().sum();
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        sizes[i] += 1;
    }
    sizes
}

/// Seeded shuffle of `ids` cut into train/dev/test.
pub fn split<S: AsRef<str>>(ids: &[S], ratios: [f64; 3], seed: u64) -> Result<CorpusSplit, CorpusError> {
    if ratios.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(CorpusError::InvalidSplit(format!("ratios must be non-negative: {ratios:?}")));
    }
    if (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(CorpusError::InvalidSplit(format!("ratios must sum to 1: {ratios:?}")));
    }
    let nonzero = ratios.iter().filter(|&&r| r > 0.0).count();
    if ids.len() < nonzero {
        return Err(CorpusError::InvalidSplit(format!(
            "{} items cannot fill {nonzero} non-empty parts",
            ids.len()
        )));
    }
    let mut unique = BTreeMap::new();
    for id in ids {
        if unique.insert(id.as_ref().to_owned(), ()).is_some() {
            return Err(CorpusError::InvalidSplit(format!("duplicate id {}", id.as_ref())));
        }
    }
    // start from a canonical order so the split depends on the id set only
    let mut shuffled: Vec<String> = unique.into_keys().collect();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let [a, b, _] = split_sizes(shuffled.len(), ratios);
    let test = shuffled.split_off(a + b);
    let dev = shuffled.split_off(a);
    Ok(CorpusSplit {
        train: shuffled,
        dev,
        test,
        seed,
        ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generation::MockBackend;
    use crate::textmetrics::EmbeddingTable;

    #[test]
    fn doc_ids() {
        let id = DocId::parse("3747-ORIG-44").unwrap();
        assert_eq!((id.doc.as_str(), id.kind, id.para.as_str()), ("3747", DocKind::Orig, "44"));
        assert_eq!(id.with_kind(DocKind::Spun).to_string(), "3747-SPUN-44");
        assert_eq!(DocId::parse("a-b-ORIG-1").unwrap().doc, "a-b");
        for bad in ["3747-44", "3747-COPY-44", "-ORIG-1", "x-ORIG-", "plain"] {
            assert!(DocId::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn split_sizes_examples() {
        assert_eq!(split_sizes(10, [0.8, 0.1, 0.1]), [8, 1, 1]);
        assert_eq!(split_sizes(7, [1.0, 0.0, 0.0]), [7, 0, 0]);
        assert_eq!(split_sizes(3, [0.5, 0.25, 0.25]), [1, 1, 1]);
        assert_eq!(split_sizes(3, [0.9, 0.05, 0.05]), [3, 0, 0]);
        assert_eq!(split_sizes(2000, [0.8, 0.1, 0.1]), [1600, 200, 200]);
    }

    #[test]
    fn split_examples() {
        let ids: Vec<String> = (0..10).map(|i| format!("d{i}-ORIG-0")).collect();
        let s = split(&ids, [1.0, 0.0, 0.0], 1).unwrap();
        assert_eq!(s.train.len(), 10);
        let s = split(&ids, [0.8, 0.1, 0.1], 1).unwrap();
        assert_eq!((s.train.len(), s.dev.len(), s.test.len()), (8, 1, 1));
        assert_eq!(s, split(&ids, [0.8, 0.1, 0.1], 1).unwrap());
        assert!(split(&ids[..2], [0.8, 0.1, 0.1], 1).is_err());
        assert!(split(&ids, [0.8, 0.1, 0.2], 1).is_err());
        assert!(split(&ids, [1.1, -0.1, 0.0], 1).is_err());
    }

    fn one_hot(words: &[&str]) -> EmbeddingTable {
        let mut e = EmbeddingTable::new(words.len());
        for (i, w) in words.iter().enumerate() {
            let mut v = vec![0.0; words.len()];
            v[i] = 1.0;
            e.insert(*w, v);
        }
        e
    }

    #[test]
    fn echo_pairs_have_identity_metrics() {
        let words = ["alpha", "beta", "gamma", "delta", "eps"];
        let originals = vec![
            Document::new("1-ORIG-0", Source::Arxiv, "alpha beta gamma delta eps").unwrap(),
            Document::new("2-ORIG-0", Source::Wikipedia, "eps delta gamma beta alpha").unwrap(),
        ];
        let scorer = Scorer::new(one_hot(&words));
        let params = GenParams {
            max_new_tokens_ratio: 1.0,
            retry_backoff_ms: 0,
            ..GenParams::default()
        };
        let out = build_pairs(
            &originals,
            &MockBackend::echo(),
            &params,
            &PromptSpec::new(""),
            &scorer,
            &BuildOptions::default(),
        )
        .unwrap();
        assert_eq!(out.pairs.len(), 2);
        let max_lm = scorer.score_text(&originals[0].text, &originals[0].text).unwrap().lm_like;
        for p in &out.pairs {
            assert_eq!((p.metrics.sem_match, p.metrics.rouge_l, p.metrics.bleu), (1.0, 1.0, 1.0));
            assert!((p.metrics.lm_like - max_lm).abs() < 1e-12);
            assert_eq!(p.paraphrase.id, p.original.id.replace("ORIG", "SPUN"));
            assert!(p.generator.as_deref().unwrap().starts_with("mock:echo#"));
        }
        assert!(verify_metrics(&out.pairs, &scorer, 1, 1e-12).unwrap().is_empty());
    }

    #[test]
    fn empty_originals_rejected() {
        let scorer = Scorer::new(one_hot(&["a"]));
        let err = build_pairs(
            &[],
            &MockBackend::echo(),
            &GenParams::default(),
            &PromptSpec::new(""),
            &scorer,
            &BuildOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, CorpusError::NoOriginals));
    }

    #[test]
    fn failure_rate_threshold() {
        // "zzz" is out of vocabulary, so scoring fails for that document
        let scorer = Scorer::new(one_hot(&["a", "b"]));
        let originals = vec![
            Document::new("1-ORIG-0", Source::Other, "a b a b").unwrap(),
            Document::new("2-ORIG-0", Source::Other, "zzz zzz zzz").unwrap(),
        ];
        let params = GenParams {
            retry_backoff_ms: 0,
            ..GenParams::default()
        };
        let strict = BuildOptions::default();
        let lenient = BuildOptions {
            max_error_rate: 0.5,
            ..BuildOptions::default()
        };
        let run = |opts: &BuildOptions| {
            build_pairs(&originals, &MockBackend::echo(), &params, &PromptSpec::new(""), &scorer, opts)
        };
        assert!(matches!(run(&strict), Err(CorpusError::TooManyFailures { failed: 1, total: 2, .. })));
        let out = run(&lenient).unwrap();
        assert_eq!(out.pairs.len(), 1);
        assert_eq!(out.failures[0].id, "2-ORIG-0");
    }

    #[test]
    fn human_pairs_have_no_generator() {
        let o = Document::new("1-ORIG-0", Source::Other, "a").unwrap();
        let p = Document::new("1-SPUN-0", Source::Other, "b").unwrap();
        let mut pair = AlignedPair {
            original: o,
            paraphrase: p,
            generator: None,
            label: PairLabel::Human,
            metrics: MetricVector::new(0.0, 0.0, 0.0, 0.0),
        };
        assert!(pair.validate().is_ok());
        pair.generator = Some("x".into());
        assert!(pair.validate().is_err());
        pair.generator = None;
        pair.paraphrase.id = "2-SPUN-0".into();
        assert!(pair.validate().is_err());
    }
}
