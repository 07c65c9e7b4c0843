//! Config-driven batch runs behind the `paraforge` binary.
//!
//! Every run reads one TOML file, applies `--seed`/`--out` on top, writes
//! the resolved config and a provenance manifest into the output directory,
//! then runs one pipeline stage.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::annotations::{self, AnalysisOptions};
use crate::corpus::{self, AlignedPair, BuildOptions, Corpus, CorpusSplit, DocFailure, Document, IngestFormat, Source};
use crate::detection::{
    self, Detector, DetectorModel, EmbeddingNbDetector, FewShotDetector, ModelFile, MultinomialNbDetector, RandomDetector,
    TextMatchDetector, Verdict,
};
use crate::evaluation::{self, EvalItem, EvalOptions};
use crate::generation::{
    Backend, ExamplePair, GenParams, MockBackend, PromptSpec, RemoteBackend, RemoteConfig, SpinPolicy, SpinnerBackend,
    SynonymTable, DEFAULT_CONTEXT_BUDGET, DEFAULT_INSTRUCTION,
};
use crate::selection::{self, CandidateSet, MetricVector, Scorer};
use crate::synth::{self, SynthConfig};
use crate::textmetrics::{self, EmbeddingTable, Scheme};

#[derive(Debug, Parser)]
#[command(name = "paraforge", version, about = "Machine-paraphrase corpus and detection pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides `out`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Originals to candidate sets.
    Generate,
    /// Candidate sets to aligned pairs.
    Select,
    /// Generate and select in one pass, then split.
    BuildCorpus,
    /// Fit a detector on the training part of a corpus.
    TrainDetector,
    /// Label documents with a detector.
    Detect,
    /// Score detectors on a corpus part with significance tests.
    Evaluate,
    /// Human-study accuracy, agreement and Likert summaries.
    AnalyzeAnnotations,
    /// Mean selection metrics per backend.
    ScoresByBackend,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Select => "select",
            Command::BuildCorpus => "build-corpus",
            Command::TrainDetector => "train-detector",
            Command::Detect => "detect",
            Command::Evaluate => "evaluate",
            Command::AnalyzeAnnotations => "analyze-annotations",
            Command::ScoresByBackend => "scores-by-backend",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

fn runtime<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{context}: {e}"))
}

fn invalid(message: impl Into<String>) -> CliError {
    CliError::Validation(message.into())
}

pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.toml";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CANDIDATES_FILE: &str = "candidates.jsonl";
pub const SELECTION_FILE: &str = "selection.jsonl";
pub const FAILURES_FILE: &str = "failures.jsonl";
pub const SPLIT_FILE: &str = "split.json";
pub const MODEL_FILE: &str = "model.json";
pub const PREDICTIONS_FILE: &str = "predictions.jsonl";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const ANNOTATION_REPORT: &str = "annotation_report.json";
pub const SCORES_CSV: &str = "scores_by_backend.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub metrics: MetricsConfig,
    pub generation: GenerationConfig,
    pub corpus: CorpusConfig,
    pub detector: DetectorConfig,
    pub evaluation: EvaluationConfig,
    pub annotations: AnnotationsConfig,
    pub scores: ScoresConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            metrics: MetricsConfig::default(),
            generation: GenerationConfig::default(),
            corpus: CorpusConfig::default(),
            detector: DetectorConfig::default(),
            evaluation: EvaluationConfig::default(),
            annotations: AnnotationsConfig::default(),
            scores: ScoresConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    /// Word vectors in text format. Without it, synthetic vectors over the
    /// bundled vocabulary are used.
    pub embeddings: Option<PathBuf>,
    pub scheme: Scheme,
    pub bleu_max_n: usize,
    pub lm_order: usize,
    pub synth: SynthConfig,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            embeddings: None,
            scheme: Scheme::default(),
            bleu_max_n: 4,
            lm_order: 2,
            synth: SynthConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    Mock {
        #[serde(default = "default_mock_mode")]
        mode: String,
        #[serde(default)]
        text: String,
    },
    Spinner {
        /// Replace every `period`-th token. Default 4 when `probability`
        /// is absent.
        period: Option<usize>,
        probability: Option<f64>,
        /// Tab-separated synonym table; the bundled one when absent.
        synonyms: Option<PathBuf>,
    },
    Remote(RemoteConfig),
}

fn default_mock_mode() -> String {
    "echo".into()
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig::Spinner {
            period: None,
            probability: None,
            synonyms: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PromptConfig {
    pub instruction: String,
    pub examples: Vec<ExamplePair>,
    pub context_budget_tokens: usize,
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self {
            instruction: DEFAULT_INSTRUCTION.into(),
            examples: Vec::new(),
            context_budget_tokens: DEFAULT_CONTEXT_BUDGET,
        }
    }
}

impl PromptConfig {
    fn spec(&self) -> PromptSpec {
        PromptSpec::new("")
            .with_instruction(self.instruction.clone())
            .with_examples(self.examples.clone())
            .with_budget(self.context_budget_tokens)
    }
}

/// `params.seed` is replaced by the run seed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerationConfig {
    pub backend: BackendConfig,
    pub prompt: PromptConfig,
    pub params: GenParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusConfig {
    pub originals: Option<PathBuf>,
    pub format: IngestFormat,
    /// Input of `select`; `<out>/candidates.jsonl` when absent.
    pub candidates: Option<PathBuf>,
    /// Corpus directory read by detector and evaluation runs.
    pub dir: Option<PathBuf>,
    pub split: [f64; 3],
    pub build: BuildOptions,
    /// Re-score every n-th pair after building; 0 disables.
    pub verify_stride: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            originals: None,
            format: IngestFormat::Jsonl,
            candidates: None,
            dir: None,
            split: [0.8, 0.1, 0.1],
            build: BuildOptions::default(),
            verify_stride: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    Random,
    W2vNb,
    NgramNb,
    TextMatch,
    FewShot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    pub kind: DetectorKind,
    /// Trained model read by `detect`.
    pub model: Option<PathBuf>,
    /// Documents JSONL labeled by `detect`.
    pub input: Option<PathBuf>,
    pub variance_floor: f64,
    pub alpha: f64,
    pub threshold: f64,
    pub ngram: usize,
    /// Few-shot examples per class, drawn from the training part.
    pub fewshot_examples: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            kind: DetectorKind::W2vNb,
            model: None,
            input: None,
            variance_floor: 1e-6,
            alpha: 1.0,
            threshold: 0.5,
            ngram: 3,
            fewshot_examples: 2,
        }
    }
}

/// `options.seed` is replaced by the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    pub detectors: Vec<DetectorKind>,
    /// Corpus part to score: train, dev or test.
    pub part: String,
    pub options: EvalOptions,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            detectors: vec![
                DetectorKind::Random,
                DetectorKind::W2vNb,
                DetectorKind::NgramNb,
                DetectorKind::TextMatch,
            ],
            part: "test".into(),
            options: EvalOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnotationsConfig {
    pub path: Option<PathBuf>,
    /// JSONL of `{"item_id", "text"}` used by the copied-text filter.
    pub tasks: Option<PathBuf>,
    pub options: AnalysisOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScoresConfig {
    pub backends: Vec<BackendConfig>,
}

impl Default for ScoresConfig {
    fn default() -> Self {
        let spinner = |period| BackendConfig::Spinner {
            period: Some(period),
            probability: None,
            synonyms: None,
        };
        Self {
            backends: vec![spinner(8), spinner(4), spinner(2)],
        }
    }
}

impl RunConfig {
    /// Parses TOML, rejecting unknown keys with their line.
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| invalid(e.to_string().trim_end().to_owned()))
    }

    /// Loads `path`; relative paths inside resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let mut config = Self::from_toml_str(&text).map_err(|e| match e {
            CliError::Validation(m) => invalid(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.rebase(base);
        Ok(config)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let fix_opt = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                fix(p);
            }
        };
        fix(&mut self.out);
        fix_opt(&mut self.metrics.embeddings);
        fix_opt(&mut self.corpus.originals);
        fix_opt(&mut self.corpus.candidates);
        fix_opt(&mut self.corpus.dir);
        fix_opt(&mut self.detector.model);
        fix_opt(&mut self.detector.input);
        fix_opt(&mut self.annotations.path);
        fix_opt(&mut self.annotations.tasks);
        for b in std::iter::once(&mut self.generation.backend).chain(self.scores.backends.iter_mut()) {
            if let BackendConfig::Spinner { synonyms, .. } = b {
                fix_opt(synonyms);
            }
        }
    }

    /// Applies flag overrides and propagates the run seed.
    pub fn resolve(mut self, seed: Option<u64>, out: Option<PathBuf>) -> Result<Self, CliError> {
        if let Some(seed) = seed {
            self.seed = seed;
        }
        if let Some(out) = out {
            self.out = out;
        }
        self.generation.params.seed = self.seed;
        self.evaluation.options.seed = self.seed;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.generation
            .params
            .validate()
            .map_err(|e| invalid(format!("generation.params: {e}")))?;
        if !(1..=4).contains(&self.metrics.bleu_max_n) {
            return Err(invalid("metrics.bleu_max_n must be in 1..=4"));
        }
        if self.metrics.lm_order == 0 {
            return Err(invalid("metrics.lm_order must be >= 1"));
        }
        let sum: f64 = self.corpus.split.iter().sum();
        if self.corpus.split.iter().any(|r| *r < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("corpus.split {:?} must be non-negative and sum to 1", self.corpus.split)));
        }
        if !["train", "dev", "test"].contains(&self.evaluation.part.as_str()) {
            return Err(invalid(format!("evaluation.part {:?} is not train, dev or test", self.evaluation.part)));
        }
        for b in std::iter::once(&self.generation.backend).chain(&self.scores.backends) {
            if let BackendConfig::Spinner {
                period: Some(_),
                probability: Some(_),
                ..
            } = b
            {
                return Err(invalid("spinner takes either period or probability, not both"));
            }
            if let BackendConfig::Mock { mode, .. } = b {
                if !["echo", "shuffle", "fixed"].contains(&mode.as_str()) {
                    return Err(invalid(format!("mock mode {mode:?} is not echo, shuffle or fixed")));
                }
            }
        }
        Ok(())
    }
}

/// What a run produced, relative to nothing: paths are as written.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub out: PathBuf,
    pub outputs: Vec<PathBuf>,
}

#[derive(Debug, Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    subcommand: &'static str,
    seed: u64,
    resolved_config: &'static str,
    embeddings: Option<String>,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(runtime(&path.display().to_string()))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

/// Tracks inputs and outputs of one run for the manifest.
struct Run {
    config: RunConfig,
    command: Command,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    embeddings: Option<String>,
}

impl Run {
    fn out(&self, name: &str) -> PathBuf {
        self.config.out.join(name)
    }

    fn input(&mut self, path: &Path) -> PathBuf {
        self.inputs.push(path.to_owned());
        path.to_owned()
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.out(name);
        fs::write(&path, bytes).map_err(runtime(&path.display().to_string()))?;
        self.outputs.push(path);
        Ok(())
    }

    fn write_jsonl<T: Serialize>(&mut self, name: &str, items: impl IntoIterator<Item = T>) -> Result<(), CliError> {
        let mut buf = Vec::new();
        for item in items {
            serde_json::to_writer(&mut buf, &item).map_err(runtime(name))?;
            buf.push(b'\n');
        }
        self.write(name, &buf)
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut buf = serde_json::to_vec_pretty(value).map_err(runtime(name))?;
        buf.push(b'\n');
        self.write(name, &buf)
    }

    fn track(&mut self, path: PathBuf) {
        self.outputs.push(path);
    }

    fn embeddings(&mut self) -> Result<EmbeddingTable, CliError> {
        let table = match self.config.metrics.embeddings.clone() {
            Some(path) => {
                let path = self.input(&path);
                EmbeddingTable::load(&path).map_err(runtime(&path.display().to_string()))?
            }
            None => synth::synthetic_embeddings(&synth::bundled_synonyms(), &self.config.metrics.synth),
        };
        self.embeddings = Some(table.digest());
        Ok(table)
    }

    fn scorer(&mut self) -> Result<Scorer, CliError> {
        let m = &self.config.metrics;
        let (scheme, bleu_max_n, lm_order) = (m.scheme, m.bleu_max_n, m.lm_order);
        Ok(Scorer {
            embeddings: self.embeddings()?,
            scheme,
            bleu_max_n,
            lm_order,
        })
    }

    fn backend(&mut self, config: &BackendConfig) -> Result<Box<dyn Backend>, CliError> {
        Ok(match config {
            BackendConfig::Mock { mode, text } => Box::new(match mode.as_str() {
                "echo" => MockBackend::echo(),
                "shuffle" => MockBackend::shuffle(),
                _ => MockBackend::fixed(text.clone()),
            }),
            BackendConfig::Spinner {
                period,
                probability,
                synonyms,
            } => {
                let table = match synonyms {
                    Some(p) => {
                        let p = self.input(p);
                        SynonymTable::load(&p).map_err(runtime(&p.display().to_string()))?
                    }
                    None => synth::bundled_synonyms(),
                };
                let policy = match probability {
                    Some(prob) => SpinPolicy::probability(*prob, table),
                    None => SpinPolicy::every_kth(period.unwrap_or(4), table),
                };
                policy.validate().map_err(|e| invalid(e.to_string()))?;
                Box::new(SpinnerBackend::new(policy))
            }
            BackendConfig::Remote(remote) => Box::new(RemoteBackend::new(remote.clone())),
        })
    }

    fn originals(&mut self) -> Result<Vec<Document>, CliError> {
        let path = self
            .config
            .corpus
            .originals
            .clone()
            .ok_or_else(|| invalid("corpus.originals is required"))?;
        let path = self.input(&path);
        corpus::ingest(&path, self.config.corpus.format).map_err(runtime("reading originals"))
    }

    fn corpus_dir(&self) -> Result<PathBuf, CliError> {
        self.config.corpus.dir.clone().ok_or_else(|| invalid("corpus.dir is required"))
    }

    /// The corpus and its split: `split.json` when the corpus has one,
    /// otherwise a fresh split by the run seed.
    fn corpus_with_split(&mut self) -> Result<(Corpus, CorpusSplit), CliError> {
        let dir = self.corpus_dir()?;
        self.input(&dir.join(corpus::DOCUMENTS_FILE));
        self.input(&dir.join(corpus::PAIRS_FILE));
        let corpus = Corpus::load(&dir).map_err(runtime("reading corpus"))?;
        let split_path = dir.join(SPLIT_FILE);
        let split = if split_path.exists() {
            self.input(&split_path);
            let text = fs::read_to_string(&split_path).map_err(runtime(SPLIT_FILE))?;
            serde_json::from_str(&text).map_err(runtime(SPLIT_FILE))?
        } else {
            split_pairs(&corpus.pairs, self.config.corpus.split, self.config.seed)?
        };
        Ok((corpus, split))
    }

    fn finish(self) -> Result<RunSummary, CliError> {
        let digests = |paths: &[PathBuf]| -> Result<Vec<FileDigest>, CliError> {
            paths
                .iter()
                .map(|p| {
                    Ok(FileDigest {
                        path: p.display().to_string(),
                        sha256: sha256_file(p)?,
                    })
                })
                .collect()
        };
        let manifest = Manifest {
            tool: "paraforge",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: self.command.name(),
            seed: self.config.seed,
            resolved_config: RESOLVED_CONFIG_FILE,
            embeddings: self.embeddings.clone(),
            inputs: digests(&self.inputs)?,
            outputs: digests(&self.outputs)?,
        };
        let path = self.out(MANIFEST_FILE);
        let mut json = serde_json::to_vec_pretty(&manifest).map_err(runtime(MANIFEST_FILE))?;
        json.push(b'\n');
        fs::write(&path, json).map_err(runtime(MANIFEST_FILE))?;
        let mut outputs = self.outputs;
        outputs.push(path);
        Ok(RunSummary {
            out: self.config.out,
            outputs,
        })
    }
}

/// One line of `candidates.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateRecord {
    pub id: String,
    pub source: Source,
    pub text: String,
    pub generator: String,
    pub candidates: Vec<String>,
}

#[derive(Debug, Serialize)]
struct FailureRecord<'a> {
    id: &'a str,
    error: &'a str,
}

#[derive(Debug, Serialize)]
struct SelectionRecord<'a> {
    id: &'a str,
    frontier: Vec<usize>,
    selected: usize,
    candidates: &'a [selection::Candidate],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskText {
    item_id: String,
    text: String,
}

#[derive(Debug, Serialize)]
struct PredictionRecord<'a> {
    id: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    confidence: Option<f64>,
    detector: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn write_failures(run: &mut Run, failures: &[DocFailure]) -> Result<(), CliError> {
    if failures.is_empty() {
        return Ok(());
    }
    run.write_jsonl(
        FAILURES_FILE,
        failures.iter().map(|f| FailureRecord {
            id: &f.id,
            error: &f.message,
        }),
    )
}

/// Splits by pair, so an original and its paraphrase stay together.
pub fn split_pairs(pairs: &[AlignedPair], ratios: [f64; 3], seed: u64) -> Result<CorpusSplit, CliError> {
    let ids: Vec<&str> = pairs.iter().map(AlignedPair::id).collect();
    corpus::split(&ids, ratios, seed).map_err(|e| invalid(e.to_string()))
}

/// Both documents of every pair in `part`, labeled.
pub fn labeled_docs<'a>(corpus: &'a Corpus, split: &CorpusSplit, part: &str) -> Vec<(&'a Document, Verdict)> {
    let ids: std::collections::HashSet<&str> = match part {
        "train" => &split.train,
        "dev" => &split.dev,
        _ => &split.test,
    }
    .iter()
    .map(String::as_str)
    .collect();
    corpus
        .pairs
        .iter()
        .filter(|p| ids.contains(p.id()))
        .flat_map(|p| [(&p.original, Verdict::Original), (&p.paraphrase, Verdict::Machine)])
        .collect()
}

fn generate(run: &mut Run) -> Result<(), CliError> {
    let originals = run.originals()?;
    let backend_cfg = run.config.generation.backend.clone();
    let backend = run.backend(&backend_cfg)?;
    let spec = run.config.generation.prompt.spec();
    let params = run.config.generation.params.clone();
    let generator = corpus::generator_tag(&backend.identity(), &spec, &params);
    let results = corpus::generate_all(&originals, &backend, &params, &spec, run.config.corpus.build.max_in_flight);
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (doc, result) in originals.iter().zip(results) {
        match result {
            Ok(g) => records.push(CandidateRecord {
                id: doc.id.clone(),
                source: doc.source,
                text: doc.text.clone(),
                generator: generator.clone(),
                candidates: g.candidates,
            }),
            Err(e) => failures.push(DocFailure {
                id: doc.id.clone(),
                message: e.to_string(),
            }),
        }
    }
    corpus::check_failures(&failures, originals.len(), run.config.corpus.build.max_error_rate)
        .map_err(runtime("generate"))?;
    run.write_jsonl(CANDIDATES_FILE, &records)?;
    write_failures(run, &failures)
}

fn select(run: &mut Run) -> Result<(), CliError> {
    let path = run
        .config
        .corpus
        .candidates
        .clone()
        .unwrap_or_else(|| run.out(CANDIDATES_FILE));
    let path = run.input(&path);
    let text = fs::read_to_string(&path).map_err(runtime(&path.display().to_string()))?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let rec: CandidateRecord = serde_json::from_str(line)
            .map_err(|e| CliError::Runtime(format!("{}:{}: {e}", path.display(), i + 1)))?;
        records.push(rec);
    }
    let scorer = run.scorer()?;
    let weights = run.config.corpus.build.weights;
    let results: Vec<Result<(AlignedPair, CandidateSet), DocFailure>> = records
        .par_iter()
        .map(|rec| {
            let doc = Document::new(rec.id.clone(), rec.source, rec.text.clone()).map_err(|e| DocFailure {
                id: rec.id.clone(),
                message: e.to_string(),
            })?;
            corpus::select_pair(&doc, &rec.candidates, &rec.generator, &scorer, &weights).map_err(|e| DocFailure {
                id: rec.id.clone(),
                message: e.to_string(),
            })
        })
        .collect();
    let mut pairs = Vec::new();
    let mut selections = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok((pair, set)) => {
                pairs.push(pair);
                selections.push(set);
            }
            Err(f) => failures.push(f),
        }
    }
    corpus::check_failures(&failures, records.len(), run.config.corpus.build.max_error_rate)
        .map_err(runtime("select"))?;
    run.write_jsonl(
        SELECTION_FILE,
        selections.iter().map(|set| {
            let vectors = set.vectors();
            SelectionRecord {
                id: &set.original_id,
                frontier: selection::pareto_frontier(&vectors),
                selected: selection::select_index(&vectors, &weights).expect("non-empty"),
                candidates: &set.candidates,
            }
        }),
    )?;
    save_corpus(run, pairs)?;
    write_failures(run, &failures)
}

fn save_corpus(run: &mut Run, mut pairs: Vec<AlignedPair>) -> Result<(), CliError> {
    pairs.sort_by(|a, b| a.id().cmp(b.id()));
    let split = split_pairs(&pairs, run.config.corpus.split, run.config.seed)?;
    let corpus = Corpus::new(pairs);
    corpus.save(&run.config.out).map_err(runtime("writing corpus"))?;
    run.track(run.out(corpus::DOCUMENTS_FILE));
    run.track(run.out(corpus::PAIRS_FILE));
    run.write_json(SPLIT_FILE, &split)
}

fn build_corpus(run: &mut Run) -> Result<(), CliError> {
    let originals = run.originals()?;
    let backend_cfg = run.config.generation.backend.clone();
    let backend = run.backend(&backend_cfg)?;
    let scorer = run.scorer()?;
    let spec = run.config.generation.prompt.spec();
    let outcome = corpus::build_pairs(
        &originals,
        &backend,
        &run.config.generation.params,
        &spec,
        &scorer,
        &run.config.corpus.build,
    )
    .map_err(runtime("build-corpus"))?;
    if run.config.corpus.verify_stride > 0 {
        let bad = corpus::verify_metrics(&outcome.pairs, &scorer, run.config.corpus.verify_stride, 1e-9)
            .map_err(runtime("verify"))?;
        if !bad.is_empty() {
            return Err(CliError::Runtime(format!("stored metrics differ on recomputation: {bad:?}")));
        }
    }
    save_corpus(run, outcome.pairs)?;
    write_failures(run, &outcome.failures)
}

fn train_model(run: &mut Run, kind: DetectorKind, train: &[(&Document, Verdict)]) -> Result<ModelFile, CliError> {
    let texts: Vec<&str> = train.iter().map(|(d, _)| d.text.as_str()).collect();
    let labels: Vec<Verdict> = train.iter().map(|(_, l)| *l).collect();
    let cfg = run.config.detector.clone();
    let scheme = run.config.metrics.scheme;
    match kind {
        DetectorKind::W2vNb => {
            let emb = run.embeddings()?;
            let digest = emb.digest();
            let det = EmbeddingNbDetector::train(&texts, &labels, emb, scheme, cfg.variance_floor)
                .map_err(runtime("training"))?;
            Ok(ModelFile::new(DetectorModel::GaussianNb(det.model), scheme, Some(digest)))
        }
        DetectorKind::NgramNb => {
            let docs = texts
                .iter()
                .map(|t| textmetrics::tokenize(t, scheme))
                .collect::<Result<Vec<_>, _>>()
                .map_err(runtime("training"))?;
            let model = detection::train_multinomial(&docs, &labels, cfg.alpha).map_err(runtime("training"))?;
            Ok(ModelFile::new(DetectorModel::MultinomialNb(model), scheme, None))
        }
        other => Err(invalid(format!("detector {other:?} has no trainable model"))),
    }
}

fn model_detector(run: &mut Run, file: ModelFile) -> Result<Box<dyn Detector>, CliError> {
    Ok(match file.model {
        DetectorModel::GaussianNb(model) => {
            let embeddings = run.embeddings()?;
            if file.embedding_digest.as_deref().is_some_and(|d| d != embeddings.digest()) {
                return Err(invalid("model was trained with different embeddings"));
            }
            Box::new(EmbeddingNbDetector {
                model,
                embeddings,
                scheme: file.scheme,
            })
        }
        DetectorModel::MultinomialNb(model) => Box::new(MultinomialNbDetector {
            model,
            scheme: file.scheme,
        }),
    })
}

fn train_detector(run: &mut Run) -> Result<(), CliError> {
    let (corpus, split) = run.corpus_with_split()?;
    let train = labeled_docs(&corpus, &split, "train");
    let model = train_model(run, run.config.detector.kind, &train)?;
    let path = run.out(MODEL_FILE);
    model.save(&path).map_err(runtime("writing model"))?;
    run.track(path);
    Ok(())
}

/// Builds a detector of `kind`. Trainable kinds fit on `train`.
fn make_detector(
    run: &mut Run,
    kind: DetectorKind,
    corpus: Option<&Corpus>,
    train: &[(&Document, Verdict)],
) -> Result<Box<dyn Detector>, CliError> {
    let scheme = run.config.metrics.scheme;
    let cfg = run.config.detector.clone();
    Ok(match kind {
        DetectorKind::Random => Box::new(RandomDetector { seed: run.config.seed }),
        DetectorKind::W2vNb | DetectorKind::NgramNb => {
            let file = train_model(run, kind, train)?;
            model_detector(run, file)?
        }
        DetectorKind::TextMatch => {
            let corpus = corpus.ok_or_else(|| invalid("text_match needs corpus.dir as its source index"))?;
            let sources: Vec<&str> = corpus.pairs.iter().map(|p| p.original.text.as_str()).collect();
            let mut det = TextMatchDetector::new(&sources, scheme).map_err(runtime("indexing"))?;
            det.threshold = cfg.threshold;
            det.n = cfg.ngram;
            Box::new(det)
        }
        DetectorKind::FewShot => {
            let backend_cfg = run.config.generation.backend.clone();
            let backend = run.backend(&backend_cfg)?;
            let mut examples = Vec::new();
            for label in Verdict::BOTH {
                examples.extend(
                    train
                        .iter()
                        .filter(|(_, l)| *l == label)
                        .take(cfg.fewshot_examples)
                        .map(|(d, l)| (d.text.clone(), *l)),
                );
            }
            Box::new(FewShotDetector::new(backend, examples).map_err(|e| invalid(e.to_string()))?)
        }
    })
}

fn detect(run: &mut Run) -> Result<(), CliError> {
    let input = run
        .config
        .detector
        .input
        .clone()
        .ok_or_else(|| invalid("detector.input is required"))?;
    let input = run.input(&input);
    let docs = corpus::ingest(&input, IngestFormat::Jsonl).map_err(runtime("reading input"))?;
    let kind = run.config.detector.kind;
    let detector: Box<dyn Detector> = match (kind, run.config.detector.model.clone()) {
        (DetectorKind::W2vNb | DetectorKind::NgramNb, Some(path)) => {
            let path = run.input(&path);
            let file = ModelFile::load(&path).map_err(runtime("reading model"))?;
            model_detector(run, file)?
        }
        (DetectorKind::W2vNb | DetectorKind::NgramNb, None) => {
            return Err(invalid("detector.model is required for trained detectors"))
        }
        (DetectorKind::Random, _) => make_detector(run, kind, None, &[])?,
        _ => {
            let (corpus, split) = run.corpus_with_split()?;
            let train = labeled_docs(&corpus, &split, "train");
            make_detector(run, kind, Some(&corpus), &train)?
        }
    };
    let name = detector.name();
    let predictions: Vec<_> = docs.par_iter().map(|d| detector.predict(&d.text)).collect();
    run.write_jsonl(
        PREDICTIONS_FILE,
        docs.iter().zip(predictions).map(|(d, p)| match p {
            Ok(p) => PredictionRecord {
                id: &d.id,
                label: Some(p.label),
                confidence: Some(p.confidence),
                detector: name.clone(),
                error: None,
            },
            Err(e) => PredictionRecord {
                id: &d.id,
                label: None,
                confidence: None,
                detector: name.clone(),
                error: Some(e.to_string()),
            },
        }),
    )
}

fn evaluate(run: &mut Run) -> Result<(), CliError> {
    let (corpus, split) = run.corpus_with_split()?;
    let train = labeled_docs(&corpus, &split, "train");
    let part = run.config.evaluation.part.clone();
    let items: Vec<EvalItem> = labeled_docs(&corpus, &split, &part)
        .into_iter()
        .map(|(d, truth)| EvalItem {
            text: d.text.clone(),
            truth,
            source: d.source,
        })
        .collect();
    if items.is_empty() {
        return Err(invalid(format!("corpus part {part} is empty")));
    }
    let mut detectors = Vec::new();
    for kind in run.config.evaluation.detectors.clone() {
        detectors.push(make_detector(run, kind, Some(&corpus), &train)?);
    }
    let refs: Vec<&dyn Detector> = detectors.iter().map(|d| d.as_ref()).collect();
    let report = evaluation::evaluate(&items, &refs, &run.config.evaluation.options).map_err(runtime("evaluate"))?;
    run.write_json(REPORT_JSON, &report)?;
    let csv = report.to_csv();
    run.write(REPORT_CSV, csv.as_bytes())
}

fn analyze_annotations(run: &mut Run) -> Result<(), CliError> {
    let path = run
        .config
        .annotations
        .path
        .clone()
        .ok_or_else(|| invalid("annotations.path is required"))?;
    let path = run.input(&path);
    let records = annotations::load_annotations(&path).map_err(runtime(&path.display().to_string()))?;
    let mut tasks = HashMap::new();
    if let Some(t) = run.config.annotations.tasks.clone() {
        let t = run.input(&t);
        let text = fs::read_to_string(&t).map_err(runtime(&t.display().to_string()))?;
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let task: TaskText = serde_json::from_str(line)
                .map_err(|e| CliError::Runtime(format!("{}:{}: {e}", t.display(), i + 1)))?;
            tasks.insert(task.item_id, task.text);
        }
    }
    let report =
        annotations::analyze(records, &tasks, &run.config.annotations.options).map_err(runtime("analyze-annotations"))?;
    run.write_json(ANNOTATION_REPORT, &report)
}

fn scores_by_backend(run: &mut Run) -> Result<(), CliError> {
    let originals = run.originals()?;
    let scorer = run.scorer()?;
    let spec = run.config.generation.prompt.spec();
    let params = run.config.generation.params.clone();
    let mut csv = String::from("backend,n,failed,sem_match,lm_like,rouge_l,bleu\n");
    for cfg in run.config.scores.backends.clone() {
        let backend = run.backend(&cfg)?;
        let outcome = corpus::build_pairs(&originals, &backend, &params, &spec, &scorer, &run.config.corpus.build)
            .map_err(runtime(&backend.identity()))?;
        let n = outcome.pairs.len().max(1) as f64;
        let sum = outcome.pairs.iter().fold([0.0; 4], |acc, p| {
            let m: &MetricVector = &p.metrics;
            [acc[0] + m.sem_match, acc[1] + m.lm_like, acc[2] + m.rouge_l, acc[3] + m.bleu]
        });
        csv.push_str(&format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6}\n",
            backend.identity(),
            outcome.pairs.len(),
            outcome.failures.len(),
            sum[0] / n,
            sum[1] / n,
            sum[2] / n,
            sum[3] / n
        ));
    }
    run.write(SCORES_CSV, csv.as_bytes())
}

/// Runs `command` under an already resolved config.
pub fn execute(command: Command, config: RunConfig) -> Result<RunSummary, CliError> {
    fs::create_dir_all(&config.out).map_err(runtime(&config.out.display().to_string()))?;
    let resolved = toml::to_string(&config).map_err(|e| invalid(format!("config cannot be written back: {e}")))?;
    let mut run = Run {
        config,
        command,
        inputs: Vec::new(),
        outputs: Vec::new(),
        embeddings: None,
    };
    run.write(RESOLVED_CONFIG_FILE, resolved.as_bytes())?;
    match command {
        Command::Generate => generate(&mut run)?,
        Command::Select => select(&mut run)?,
        Command::BuildCorpus => build_corpus(&mut run)?,
        Command::TrainDetector => train_detector(&mut run)?,
        Command::Detect => detect(&mut run)?,
        Command::Evaluate => evaluate(&mut run)?,
        Command::AnalyzeAnnotations => analyze_annotations(&mut run)?,
        Command::ScoresByBackend => scores_by_backend(&mut run)?,
    }
    run.finish()
}

/// Parses arguments, runs, reports, and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = cli
        .config
        .as_deref()
        .map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
        .and_then(|c| c.resolve(cli.seed, cli.out.clone()))
        .and_then(|c| execute(cli.command, c));
    match result {
        Ok(summary) => {
            let mut stdout = std::io::stdout().lock();
            for p in &summary.outputs {
                let _ = writeln!(stdout, "{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("paraforge: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::from_toml_str("seed = 1\n[corpus]\norignals = \"x\"\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("orignals"), "{msg}");
        assert!(msg.contains("line 3"), "{msg}");
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn backend_variants_parse() {
        let c = RunConfig::from_toml_str(
            r#"
            [generation.backend]
            kind = "remote"
            endpoint = "http://localhost:1/v1"
            body_template = '{"prompt": {{prompt}}}'
            response_path = "choices/0/text"
            "#,
        )
        .unwrap();
        assert!(matches!(c.generation.backend, BackendConfig::Remote(_)));
        let c = RunConfig::from_toml_str("[generation.backend]\nkind = \"mock\"\nmode = \"shuffle\"\n").unwrap();
        assert!(matches!(c.generation.backend, BackendConfig::Mock { .. }));
        assert!(RunConfig::from_toml_str("[generation.backend]\nkind = \"mock\"\nbogus = 1\n").is_err());
    }

    #[test]
    fn resolve_applies_overrides() {
        let c = RunConfig::default().resolve(Some(9), Some("elsewhere".into())).unwrap();
        assert_eq!((c.seed, c.generation.params.seed, c.evaluation.options.seed), (9, 9, 9));
        assert_eq!(c.out, PathBuf::from("elsewhere"));
        let mut bad = RunConfig::default();
        bad.corpus.split = [0.5, 0.5, 0.5];
        assert_eq!(bad.resolve(None, None).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn default_config_round_trips_through_toml() {
        let c = RunConfig::default();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), c);
    }
}
