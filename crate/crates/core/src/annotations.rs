//! Human-study analytics: assessment filtering, per-participant accuracy,
//! agreement, Likert summaries and duration outliers.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::detection::Verdict;
use crate::evaluation::{self, EvalError, MeanCi, StatResult};
use crate::textmetrics::{self, EmbeddingTable, MetricError, Scheme};

/// System name of unparaphrased items.
pub const ORIGINAL_SYSTEM: &str = "original";

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("rows have unequal rater counts ({0} vs {1})")]
    UnequalRaters(u64, u64),
    #[error("need at least 2 raters per item, got {0}")]
    TooFewRaters(u64),
    #[error("no items to score")]
    NoItems,
    #[error("need at least 2 durations, got {0}")]
    TooFewDurations(usize),
    #[error("inputs differ in length ({0}, {1}, {2})")]
    Misaligned(usize, usize, usize),
    #[error("unknown control system {0}")]
    UnknownControl(String),
    #[error("metric: {0}")]
    Metric(#[from] MetricError),
    #[error("statistics: {0}")]
    Stats(#[from] EvalError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    Machine,
    Original,
    DontKnow,
}

impl Answer {
    pub const ALL: [Answer; 3] = [Answer::Machine, Answer::Original, Answer::DontKnow];

    pub fn verdict(self) -> Option<Verdict> {
        match self {
            Answer::Machine => Some(Verdict::Machine),
            Answer::Original => Some(Verdict::Original),
            Answer::DontKnow => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Likert {
    pub clarity: u8,
    pub fluency: u8,
    pub coherence: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Clarity,
    Fluency,
    Coherence,
}

impl Likert {
    pub fn get(&self, dim: Dimension) -> u8 {
        match dim {
            Dimension::Clarity => self.clarity,
            Dimension::Fluency => self.fluency,
            Dimension::Coherence => self.coherence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationRecord {
    pub participant_id: String,
    pub item_id: String,
    pub system: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<Answer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub likert: Option<Likert>,
    #[serde(default)]
    pub justification: String,
    pub duration_minutes: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demographics: Option<BTreeMap<String, Value>>,
}

impl AnnotationRecord {
    pub fn validate(&self) -> Result<(), String> {
        match (&self.answer, &self.likert) {
            (Some(_), Some(_)) => return Err("record has both answer and likert".into()),
            (None, None) => return Err("record has neither answer nor likert".into()),
            _ => {}
        }
        if let Some(l) = &self.likert {
            for dim in [Dimension::Clarity, Dimension::Fluency, Dimension::Coherence] {
                if !(1..=5).contains(&l.get(dim)) {
                    return Err(format!("likert {dim:?} = {} outside 1..5", l.get(dim)));
                }
            }
        }
        if !self.duration_minutes.is_finite() || self.duration_minutes < 0.0 {
            return Err(format!("invalid duration {}", self.duration_minutes));
        }
        Ok(())
    }

    /// Ground truth of the annotated item.
    pub fn truth(&self) -> Verdict {
        if self.system == ORIGINAL_SYSTEM {
            Verdict::Original
        } else {
            Verdict::Machine
        }
    }

    /// `Some(correct)` for non-neutral answers.
    pub fn is_correct(&self) -> Option<bool> {
        self.answer.and_then(Answer::verdict).map(|v| v == self.truth())
    }
}

/// Parses annotation JSONL, validating every record.
pub fn read_annotations<R: BufRead>(reader: R) -> Result<Vec<AnnotationRecord>, AnnotationError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| AnnotationError::Malformed { line: idx + 1, message };
        let rec: AnnotationRecord = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        rec.validate().map_err(malformed)?;
        out.push(rec);
    }
    Ok(out)
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<Vec<AnnotationRecord>, AnnotationError> {
    read_annotations(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    pub min_justification_tokens: usize,
    /// Justifications matching the task text above this are copies.
    pub max_copy_match: f64,
    pub copy_ngram: usize,
    pub scheme: Scheme,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            min_justification_tokens: 3,
            max_copy_match: 0.9,
            copy_ngram: 3,
            scheme: Scheme::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum RejectReason {
    CopiedText { text_match: f64 },
    TooShort { tokens: usize },
    Demographics { field: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub record: AnnotationRecord,
    #[serde(flatten)]
    pub reason: RejectReason,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FilterOutcome {
    pub kept: Vec<AnnotationRecord>,
    pub rejected: Vec<Rejection>,
}

/// Rejects classification records whose justification is too short or
/// copied from the task text. Likert records pass through.
pub fn filter_assessments(
    records: Vec<AnnotationRecord>,
    task_text_by_item: &HashMap<String, String>,
    config: &FilterConfig,
) -> FilterOutcome {
    let mut out = FilterOutcome::default();
    for record in records {
        match assessment_reason(&record, task_text_by_item, config) {
            Some(reason) => out.rejected.push(Rejection { record, reason }),
            None => out.kept.push(record),
        }
    }
    out
}

fn assessment_reason(
    record: &AnnotationRecord,
    task_text_by_item: &HashMap<String, String>,
    config: &FilterConfig,
) -> Option<RejectReason> {
    record.answer?;
    let just = textmetrics::tokenize(&record.justification, config.scheme)
        .ok()
        .filter(|t| t.len() >= config.min_justification_tokens.max(1));
    let Some(just) = just else {
        let tokens = textmetrics::tokenize(&record.justification, config.scheme).map_or(0, |t| t.len());
        return Some(RejectReason::TooShort { tokens });
    };
    let task = task_text_by_item
        .get(&record.item_id)
        .and_then(|t| textmetrics::tokenize(t, config.scheme).ok())?;
    let n = config.copy_ngram.clamp(1, just.len());
    let score = textmetrics::text_match(&just, &task, n).ok()?.value();
    (score > config.max_copy_match).then_some(RejectReason::CopiedText { text_match: score })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum DemographicRule {
    /// Numeric field must be at least `value`.
    Min { field: String, value: f64 },
    /// String field must be one of `values`.
    OneOf { field: String, values: Vec<String> },
}

impl DemographicRule {
    fn field(&self) -> &str {
        match self {
            DemographicRule::Min { field, .. } | DemographicRule::OneOf { field, .. } => field,
        }
    }

    fn admits(&self, demo: Option<&BTreeMap<String, Value>>) -> bool {
        let value = demo.and_then(|d| d.get(self.field()));
        match (self, value) {
            (DemographicRule::Min { value: min, .. }, Some(v)) => v.as_f64().is_some_and(|x| x >= *min),
            (DemographicRule::OneOf { values, .. }, Some(Value::String(s))) => values.contains(s),
            _ => false,
        }
    }
}

/// Drops records failing any rule; a record without the field fails.
pub fn filter_demographics(records: Vec<AnnotationRecord>, rules: &[DemographicRule]) -> FilterOutcome {
    let mut out = FilterOutcome::default();
    for record in records {
        match rules.iter().find(|r| !r.admits(record.demographics.as_ref())) {
            Some(rule) => out.rejected.push(Rejection {
                reason: RejectReason::Demographics {
                    field: rule.field().to_owned(),
                },
                record,
            }),
            None => out.kept.push(record),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticipantScore {
    /// Correct over non-neutral answers.
    pub accuracy: f64,
    /// "Don't know" over all answers.
    pub dont_know_ratio: f64,
    pub answers: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParticipantAccuracy {
    pub scores: BTreeMap<String, ParticipantScore>,
    /// Participants without a non-neutral answer, with the reason.
    pub excluded: BTreeMap<String, String>,
}

#[derive(Default)]
struct Tally {
    correct: usize,
    wrong: usize,
    dont_know: usize,
}

/// Per-participant accuracy over classification records.
pub fn participant_accuracy<'a, I>(records: I) -> ParticipantAccuracy
where
    I: IntoIterator<Item = &'a AnnotationRecord>,
{
    let mut tallies: BTreeMap<&str, Tally> = BTreeMap::new();
    for r in records {
        let Some(answer) = r.answer else { continue };
        let t = tallies.entry(&r.participant_id).or_default();
        match r.is_correct() {
            Some(true) => t.correct += 1,
            Some(false) => t.wrong += 1,
            None if answer == Answer::DontKnow => t.dont_know += 1,
            None => unreachable!("non-neutral answers are always scored"),
        }
    }
    let mut out = ParticipantAccuracy::default();
    for (pid, t) in tallies {
        let non_neutral = t.correct + t.wrong;
        let answers = non_neutral + t.dont_know;
        if non_neutral == 0 {
            out.excluded
                .insert(pid.to_owned(), format!("no non-neutral answers among {answers}"));
            continue;
        }
        out.scores.insert(
            pid.to_owned(),
            ParticipantScore {
                accuracy: t.correct as f64 / non_neutral as f64,
                dont_know_ratio: t.dont_know as f64 / answers as f64,
                answers,
            },
        );
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementResult {
    pub kappa: f64,
    pub n_items: usize,
    pub n_raters_per_item: u64,
}

/// Fleiss' kappa over an items × categories count matrix.
///
/// When every rating falls in one category the chance agreement is 1 and
/// kappa is undefined; it is reported as 1.0.
pub fn fleiss_kappa(matrix: &[Vec<u64>]) -> Result<AgreementResult, AnnotationError> {
    let first = matrix.first().ok_or(AnnotationError::NoItems)?;
    let n: u64 = first.iter().sum();
    for row in matrix {
        let s: u64 = row.iter().sum();
        if s != n {
            return Err(AnnotationError::UnequalRaters(n, s));
        }
    }
    if n < 2 {
        return Err(AnnotationError::TooFewRaters(n));
    }
    let items = matrix.len() as f64;
    let nf = n as f64;
    let categories = matrix.iter().map(Vec::len).max().unwrap_or(0);
    let mut marginals = vec![0u64; categories];
    let mut p_bar = 0.0;
    for row in matrix {
        let sq: u64 = row.iter().map(|c| c * c).sum();
        p_bar += (sq - n) as f64 / (nf * (nf - 1.0));
        for (m, c) in marginals.iter_mut().zip(row) {
            *m += c;
        }
    }
    p_bar /= items;
    let p_e: f64 = marginals
        .iter()
        .map(|&m| {
            let p = m as f64 / (items * nf);
            p * p
        })
        .sum();
    let kappa = if p_e >= 1.0 { 1.0 } else { (p_bar - p_e) / (1.0 - p_e) };
    Ok(AgreementResult {
        kappa,
        n_items: matrix.len(),
        n_raters_per_item: n,
    })
}

/// Items × answer-category counts (machine, original, dont_know), items
/// in id order.
pub fn answer_matrix<'a, I>(records: I) -> Vec<Vec<u64>>
where
    I: IntoIterator<Item = &'a AnnotationRecord>,
{
    let mut by_item: BTreeMap<&str, Vec<u64>> = BTreeMap::new();
    for r in records {
        if let Some(a) = r.answer {
            let row = by_item.entry(&r.item_id).or_insert_with(|| vec![0; 3]);
            row[Answer::ALL.iter().position(|x| *x == a).expect("listed")] += 1;
        }
    }
    by_item.into_values().collect()
}

/// Rows with the most common rater count (ties go to the larger count),
/// plus how many rows were left out. Filters and outlier removal can leave
/// items with fewer raters than the design had.
pub fn balanced_rows(matrix: Vec<Vec<u64>>) -> (Vec<Vec<u64>>, usize) {
    let mut freq: BTreeMap<u64, usize> = BTreeMap::new();
    for row in &matrix {
        *freq.entry(row.iter().sum()).or_default() += 1;
    }
    let Some((&n, _)) = freq.iter().max_by_key(|(n, c)| (**c, **n)) else {
        return (matrix, 0);
    };
    let total = matrix.len();
    let kept: Vec<Vec<u64>> = matrix.into_iter().filter(|r| r.iter().sum::<u64>() == n).collect();
    let dropped = total - kept.len();
    (kept, dropped)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikertCell {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single rating.
    pub std: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LikertSummary {
    pub cells: BTreeMap<String, BTreeMap<Dimension, LikertCell>>,
    pub warnings: Vec<String>,
}

/// Mean and sample std of each Likert dimension per system.
pub fn likert_summary<'a, I>(records: I) -> LikertSummary
where
    I: IntoIterator<Item = &'a AnnotationRecord>,
{
    let mut systems: BTreeSet<&str> = BTreeSet::new();
    let mut ratings: BTreeMap<&str, Vec<Likert>> = BTreeMap::new();
    for r in records {
        systems.insert(&r.system);
        if let Some(l) = r.likert {
            ratings.entry(&r.system).or_default().push(l);
        }
    }
    let mut out = LikertSummary::default();
    for system in systems {
        let Some(rs) = ratings.get(system) else {
            out.warnings.push(format!("{system}: no likert ratings, omitted"));
            continue;
        };
        if rs.len() == 1 {
            out.warnings.push(format!("{system}: single rating, std reported as 0"));
        }
        let mut row = BTreeMap::new();
        for dim in [Dimension::Clarity, Dimension::Fluency, Dimension::Coherence] {
            let xs: Vec<f64> = rs.iter().map(|l| f64::from(l.get(dim))).collect();
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let std = if xs.len() < 2 {
                0.0
            } else {
                (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            };
            row.insert(dim, LikertCell { mean, std, n: xs.len() });
        }
        out.cells.insert(system.to_owned(), row);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutlierConfig {
    pub k_sigma: f64,
    /// Population σ when true, sample σ otherwise.
    pub population: bool,
}

impl Default for OutlierConfig {
    fn default() -> Self {
        Self {
            k_sigma: 2.0,
            population: true,
        }
    }
}

/// Per-participant duration: mean over that participant's records.
pub fn participant_durations<'a, I>(records: I) -> BTreeMap<String, f64>
where
    I: IntoIterator<Item = &'a AnnotationRecord>,
{
    let mut acc: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for r in records {
        let e = acc.entry(&r.participant_id).or_insert((0.0, 0));
        e.0 += r.duration_minutes;
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(p, (s, n))| (p.to_owned(), s / n as f64))
        .collect()
}

/// Participants whose duration lies outside `μ ± kσ`.
pub fn duration_outliers<'a, I>(records: I, config: &OutlierConfig) -> Result<Vec<String>, AnnotationError>
where
    I: IntoIterator<Item = &'a AnnotationRecord>,
{
    let durations = participant_durations(records);
    let values: Vec<f64> = durations.values().copied().collect();
    let (lo, hi) = outlier_bounds(&values, config)?;
    Ok(durations
        .into_iter()
        .filter(|(_, d)| *d < lo || *d > hi)
        .map(|(p, _)| p)
        .collect())
}

/// `(μ − kσ, μ + kσ)` of `values`.
pub fn outlier_bounds(values: &[f64], config: &OutlierConfig) -> Result<(f64, f64), AnnotationError> {
    if values.len() < 2 {
        return Err(AnnotationError::TooFewDurations(values.len()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    let sigma = (ss / if config.population { n } else { n - 1.0 }).sqrt();
    Ok((mean - config.k_sigma * sigma, mean + config.k_sigma * sigma))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTriangle {
    pub human_original: f64,
    pub machine_original: f64,
    pub human_machine: f64,
}

/// Mean sem_match over aligned (original, human, machine) triples.
pub fn similarity_triangle<S: AsRef<str>>(
    originals: &[S],
    human: &[S],
    machine: &[S],
    emb: &EmbeddingTable,
    scheme: Scheme,
) -> Result<SimilarityTriangle, AnnotationError> {
    if originals.len() != human.len() || human.len() != machine.len() {
        return Err(AnnotationError::Misaligned(originals.len(), human.len(), machine.len()));
    }
    if originals.is_empty() {
        return Err(AnnotationError::NoItems);
    }
    let mut sums = [0.0; 3];
    for ((o, h), m) in originals.iter().zip(human).zip(machine) {
        let o = textmetrics::tokenize(o.as_ref(), scheme)?;
        let h = textmetrics::tokenize(h.as_ref(), scheme)?;
        let m = textmetrics::tokenize(m.as_ref(), scheme)?;
        sums[0] += textmetrics::sem_match(&h, &o, emb)?.value();
        sums[1] += textmetrics::sem_match(&m, &o, emb)?.value();
        sums[2] += textmetrics::sem_match(&h, &m, emb)?.value();
    }
    let n = originals.len() as f64;
    Ok(SimilarityTriangle {
        human_original: sums[0] / n,
        machine_original: sums[1] / n,
        human_machine: sums[2] / n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemAccuracy {
    pub system: String,
    pub participants: usize,
    pub ci: MeanCi,
    /// "Don't know" share over all answers on this system's items.
    pub dont_know_ratio: f64,
    /// Welch test against the control, Bonferroni-corrected.
    pub vs_control: Option<StatResult>,
}

/// Human accuracy per system: each participant's accuracy on that
/// system's items forms one sample.
///
/// Every system other than the control and [`ORIGINAL_SYSTEM`] is tested
/// against the control; the correction counts those tests.
pub fn system_accuracy(
    records: &[AnnotationRecord],
    control: Option<&str>,
    level: f64,
) -> Result<Vec<SystemAccuracy>, AnnotationError> {
    let mut by_system: BTreeMap<&str, Vec<&AnnotationRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.answer.is_some()) {
        by_system.entry(&r.system).or_default().push(r);
    }
    if let Some(c) = control {
        if !by_system.contains_key(c) {
            return Err(AnnotationError::UnknownControl(c.to_owned()));
        }
    }
    let samples: BTreeMap<&str, Vec<f64>> = by_system
        .iter()
        .map(|(s, rs)| {
            let acc = participant_accuracy(rs.iter().copied());
            (*s, acc.scores.values().map(|p| p.accuracy).collect())
        })
        .collect();
    let tested = |s: &str| Some(s) != control && s != ORIGINAL_SYSTEM;
    let m = samples.keys().filter(|s| tested(s)).count();

    let mut out = Vec::new();
    for (system, rs) in &by_system {
        let sample = &samples[system];
        let dont_know = rs.iter().filter(|r| r.answer == Some(Answer::DontKnow)).count();
        let vs_control = match control {
            Some(c) if tested(system) => {
                Some(evaluation::t_test_two_sample(&samples[c], sample)?.with_bonferroni(m))
            }
            _ => None,
        };
        out.push(SystemAccuracy {
            system: (*system).to_owned(),
            participants: sample.len(),
            ci: evaluation::mean_ci(sample, level)?,
            dont_know_ratio: dont_know as f64 / rs.len() as f64,
            vs_control,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisOptions {
    pub filter: FilterConfig,
    pub demographics: Vec<DemographicRule>,
    pub outliers: OutlierConfig,
    /// Drop flagged participants before computing accuracy.
    pub drop_outliers: bool,
    pub control: Option<String>,
    pub confidence_level: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            filter: FilterConfig::default(),
            demographics: Vec::new(),
            outliers: OutlierConfig::default(),
            drop_outliers: true,
            control: None,
            confidence_level: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationReport {
    pub records: usize,
    pub rejected: Vec<Rejection>,
    pub duration_outliers: Vec<String>,
    pub mean_participant_accuracy: f64,
    pub participants: ParticipantAccuracy,
    pub systems: Vec<SystemAccuracy>,
    pub agreement: Option<AgreementResult>,
    pub likert: LikertSummary,
    pub warnings: Vec<String>,
}

/// Full pipeline: demographic and assessment filters, outlier removal,
/// then accuracy, agreement and Likert summaries.
pub fn analyze(
    records: Vec<AnnotationRecord>,
    task_text_by_item: &HashMap<String, String>,
    options: &AnalysisOptions,
) -> Result<AnnotationReport, AnnotationError> {
    let total = records.len();
    let demo = filter_demographics(records, &options.demographics);
    let assessed = filter_assessments(demo.kept, task_text_by_item, &options.filter);
    let mut rejected = demo.rejected;
    rejected.extend(assessed.rejected);
    let mut kept = assessed.kept;

    let mut warnings = Vec::new();
    let outliers = duration_outliers(&kept, &options.outliers)?;
    if options.drop_outliers {
        kept.retain(|r| !outliers.contains(&r.participant_id));
    }

    let participants = participant_accuracy(&kept);
    if participants.scores.is_empty() {
        return Err(AnnotationError::NoItems);
    }
    let mean_participant_accuracy =
        participants.scores.values().map(|p| p.accuracy).sum::<f64>() / participants.scores.len() as f64;
    let systems = system_accuracy(&kept, options.control.as_deref(), options.confidence_level)?;
    let (matrix, dropped) = balanced_rows(answer_matrix(&kept));
    if dropped > 0 {
        warnings.push(format!(
            "agreement computed over {} items; {dropped} items with a different rater count left out",
            matrix.len()
        ));
    }
    let agreement = match fleiss_kappa(&matrix) {
        Ok(a) => Some(a),
        Err(e) => {
            warnings.push(format!("agreement not computed: {e}"));
            None
        }
    };
    let likert = likert_summary(&kept);
    warnings.extend(likert.warnings.iter().cloned());

    Ok(AnnotationReport {
        records: total,
        rejected,
        duration_outliers: outliers,
        mean_participant_accuracy,
        participants,
        systems,
        agreement,
        likert,
        warnings,
    })
}
