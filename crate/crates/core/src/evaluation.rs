//! Detector scoring and significance testing.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::corpus::Source;
use crate::detection::{Detector, Verdict};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {need} values, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("iterations must be at least 1")]
    NoIterations,
    #[error("confidence level {0} outside (0, 1)")]
    InvalidLevel(f64),
    #[error("both samples have zero variance and different means")]
    DegenerateVariance,
    #[error("confusion matrix is empty")]
    EmptyMatrix,
}

/// Counts indexed `[truth][prediction]` by [`Verdict::index`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 2]; 2],
}

impl ConfusionMatrix {
    pub fn from_labels(truth: &[Verdict], predicted: &[Verdict]) -> Result<Self, EvalError> {
        if truth.len() != predicted.len() {
            return Err(EvalError::LengthMismatch(truth.len(), predicted.len()));
        }
        let mut cm = Self::default();
        for (t, p) in truth.iter().zip(predicted) {
            cm.add(*t, *p);
        }
        Ok(cm)
    }

    pub fn add(&mut self, truth: Verdict, predicted: Verdict) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        self.counts[0][0] + self.counts[1][1]
    }

    /// F1 of one class; 0 when precision or recall is undefined.
    pub fn f1(&self, class: Verdict) -> f64 {
        let k = class.index();
        let tp = self.counts[k][k] as f64;
        let predicted: u64 = self.counts[0][k] + self.counts[1][k];
        let support: u64 = self.counts[k].iter().sum();
        if tp == 0.0 || predicted == 0 || support == 0 {
            return 0.0;
        }
        let p = tp / predicted as f64;
        let r = tp / support as f64;
        2.0 * p * r / (p + r)
    }

    /// Same matrix with the two classes swapped.
    pub fn relabeled(&self) -> Self {
        let c = self.counts;
        Self {
            counts: [[c[1][1], c[1][0]], [c[0][1], c[0][0]]],
        }
    }
}

/// Unweighted mean of the per-class F1 scores. A class without support
/// contributes 0.
pub fn f1_macro(cm: &ConfusionMatrix) -> Result<f64, EvalError> {
    if cm.total() == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    Ok((cm.f1(Verdict::Machine) + cm.f1(Verdict::Original)) / 2.0)
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64, EvalError> {
    if cm.total() == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    Ok(cm.correct() as f64 / cm.total() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatMethod {
    TTwoSample,
    Permutation,
    PermutationExact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatResult {
    /// Welch t, or the observed mean paired difference.
    pub statistic: f64,
    pub p_value: f64,
    pub method: StatMethod,
    /// Bonferroni-adjusted p, when a family correction was applied.
    pub corrected: Option<f64>,
}

impl StatResult {
    pub fn with_bonferroni(mut self, m: usize) -> Self {
        self.corrected = Some((self.p_value * m as f64).min(1.0));
        self
    }
}

/// Largest n for which [`permutation_test`] enumerates every sign pattern.
pub const EXACT_PERMUTATION_LIMIT: usize = 20;

fn paired_diffs(a: &[f64], b: &[f64]) -> Result<Vec<f64>, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(EvalError::TooFew { need: 1, got: 0 });
    }
    Ok(a.iter().zip(b).map(|(x, y)| x - y).collect())
}

/// Tolerance for "at least as extreme": sums of the same values in a
/// different order can differ in the last bits.
fn extreme_tol(diffs: &[f64]) -> f64 {
    1e-9 * diffs.iter().map(|d| d.abs()).sum::<f64>().max(1.0)
}

/// Paired two-sided sign-flip test on the mean difference.
///
/// Uses exact enumeration when `a.len() <= 20`, otherwise
/// [`permutation_test_monte_carlo`].
pub fn permutation_test(a: &[f64], b: &[f64], iterations: usize, seed: u64) -> Result<StatResult, EvalError> {
    if a.len() <= EXACT_PERMUTATION_LIMIT {
        if iterations == 0 {
            return Err(EvalError::NoIterations);
        }
        permutation_test_exact(a, b)
    } else {
        permutation_test_monte_carlo(a, b, iterations, seed)
    }
}

/// Exact p: the share of all `2^n` sign patterns whose |sum| reaches the
/// observed |sum|. Walks patterns in Gray-code order, one flip per step.
pub fn permutation_test_exact(a: &[f64], b: &[f64]) -> Result<StatResult, EvalError> {
    let diffs = paired_diffs(a, b)?;
    let n = diffs.len();
    assert!(n <= 30, "exact enumeration is limited to 30 pairs");
    let observed: f64 = diffs.iter().sum();
    let threshold = observed.abs() - extreme_tol(&diffs);
    let mut signs = vec![1.0f64; n];
    let mut sum = observed;
    let mut hits: u64 = u64::from(sum.abs() >= threshold);
    let total: u64 = 1 << n;
    for step in 1..total {
        let bit = step.trailing_zeros() as usize;
        sum -= 2.0 * signs[bit] * diffs[bit];
        signs[bit] = -signs[bit];
        if sum.abs() >= threshold {
            hits += 1;
        }
    }
    Ok(StatResult {
        statistic: observed / n as f64,
        p_value: hits as f64 / total as f64,
        method: StatMethod::PermutationExact,
        corrected: None,
    })
}

const MC_CHUNK: usize = 1024;

/// Monte-Carlo sign-flip test, `p = (1 + hits) / (1 + iterations)`.
///
/// Iterations run in chunks of 1024, each drawing from its own ChaCha
/// stream, so the result does not depend on thread scheduling.
pub fn permutation_test_monte_carlo(a: &[f64], b: &[f64], iterations: usize, seed: u64) -> Result<StatResult, EvalError> {
    if iterations == 0 {
        return Err(EvalError::NoIterations);
    }
    let diffs = paired_diffs(a, b)?;
    let observed: f64 = diffs.iter().sum();
    let threshold = observed.abs() - extreme_tol(&diffs);
    let chunks = iterations.div_ceil(MC_CHUNK);
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let len = MC_CHUNK.min(iterations - chunk * MC_CHUNK);
            let mut hits = 0u64;
            for _ in 0..len {
                let s: f64 = diffs
                    .iter()
                    .map(|d| if rng.random::<bool>() { *d } else { -*d })
                    .sum();
                if s.abs() >= threshold {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    Ok(StatResult {
        statistic: observed / diffs.len() as f64,
        p_value: (1 + hits) as f64 / (1 + iterations) as f64,
        method: StatMethod::Permutation,
        corrected: None,
    })
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Welch's two-sided t-test.
///
/// Two zero-variance samples with equal means give `t = 0, p = 1`; with
/// different means the test is undefined and returns
/// [`EvalError::DegenerateVariance`].
pub fn t_test_two_sample(a: &[f64], b: &[f64]) -> Result<StatResult, EvalError> {
    for x in [a, b] {
        if x.len() < 2 {
            return Err(EvalError::TooFew { need: 2, got: x.len() });
        }
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let se2 = sa + sb;
    if se2 == 0.0 {
        if ma == mb {
            return Ok(StatResult {
                statistic: 0.0,
                p_value: 1.0,
                method: StatMethod::TTwoSample,
                corrected: None,
            });
        }
        return Err(EvalError::DegenerateVariance);
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("df is positive");
    let p = (2.0 * dist.sf(t.abs())).clamp(f64::MIN_POSITIVE, 1.0);
    Ok(StatResult {
        statistic: t,
        p_value: p,
        method: StatMethod::TTwoSample,
        corrected: None,
    })
}

/// `min(1, m·p)` for each p.
pub fn bonferroni(pvals: &[f64], m: usize) -> Vec<f64> {
    pvals.iter().map(|p| (p * m as f64).min(1.0)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Student-t confidence interval around the sample mean.
pub fn mean_ci(values: &[f64], level: f64) -> Result<MeanCi, EvalError> {
    if values.len() < 2 {
        return Err(EvalError::TooFew {
            need: 2,
            got: values.len(),
        });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(EvalError::InvalidLevel(level));
    }
    let (mean, var) = mean_var(values);
    if var == 0.0 {
        return Ok(MeanCi { mean, lo: mean, hi: mean });
    }
    let df = values.len() as f64 - 1.0;
    let q = StudentsT::new(0.0, 1.0, df)
        .expect("df is positive")
        .inverse_cdf(1.0 - (1.0 - level) / 2.0);
    let half = q * (var / values.len() as f64).sqrt();
    Ok(MeanCi {
        mean,
        lo: mean - half,
        hi: mean + half,
    })
}

/// One labeled text to score detectors on.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalItem {
    pub text: String,
    pub truth: Verdict,
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub n: u64,
    pub f1_macro: f64,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
}

impl Scores {
    fn from_cm(cm: ConfusionMatrix) -> Option<Self> {
        Some(Self {
            n: cm.total(),
            f1_macro: f1_macro(&cm).ok()?,
            accuracy: accuracy(&cm).ok()?,
            confusion: cm,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorReport {
    pub detector: String,
    pub overall: Scores,
    pub by_source: BTreeMap<Source, Scores>,
    /// Items the detector could not label; scored as wrong.
    pub abstentions: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    #[serde(flatten)]
    pub result: StatResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalOptions {
    pub iterations: usize,
    pub seed: u64,
    /// Detector every other detector is compared against; typically the
    /// random baseline.
    pub baseline: Option<String>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            seed: 0,
            baseline: Some("random".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n_items: usize,
    pub detectors: Vec<DetectorReport>,
    /// Each detector against the baseline.
    pub vs_baseline: Vec<Comparison>,
    /// Each detector against the strongest other detector by F1-macro.
    pub vs_best: Vec<Comparison>,
    /// All detector pairs, Bonferroni-corrected over the family.
    pub pairwise: Vec<Comparison>,
    pub iterations: usize,
    pub seed: u64,
}

/// Runs every detector over `items` and compares their per-item
/// correctness with paired sign-flip tests.
pub fn evaluate(items: &[EvalItem], detectors: &[&dyn Detector], options: &EvalOptions) -> Result<EvaluationReport, EvalError> {
    if items.is_empty() {
        return Err(EvalError::EmptyMatrix);
    }
    let mut reports = Vec::new();
    let mut correctness: Vec<(String, Vec<f64>)> = Vec::new();
    for det in detectors {
        let preds: Vec<Option<Verdict>> = items.par_iter().map(|it| det.predict(&it.text).ok().map(|p| p.label)).collect();
        let mut overall = ConfusionMatrix::default();
        let mut by_source: BTreeMap<Source, ConfusionMatrix> = BTreeMap::new();
        let mut abstentions = 0;
        let mut correct = Vec::with_capacity(items.len());
        for (item, pred) in items.iter().zip(&preds) {
            let pred = pred.unwrap_or_else(|| {
                abstentions += 1;
                item.truth.flip()
            });
            overall.add(item.truth, pred);
            by_source.entry(item.source).or_default().add(item.truth, pred);
            correct.push(f64::from(u8::from(pred == item.truth)));
        }
        reports.push(DetectorReport {
            detector: det.name(),
            overall: Scores::from_cm(overall).expect("non-empty"),
            by_source: by_source
                .into_iter()
                .filter_map(|(s, cm)| Scores::from_cm(cm).map(|sc| (s, sc)))
                .collect(),
            abstentions,
        });
        correctness.push((det.name(), correct));
    }

    let test = |i: usize, j: usize| -> Result<Comparison, EvalError> {
        Ok(Comparison {
            a: correctness[i].0.clone(),
            b: correctness[j].0.clone(),
            result: permutation_test(&correctness[i].1, &correctness[j].1, options.iterations, options.seed)?,
        })
    };

    let k = correctness.len();
    let baseline = options
        .baseline
        .as_ref()
        .and_then(|b| correctness.iter().position(|(name, _)| name == b));
    let mut vs_baseline = Vec::new();
    if let Some(b) = baseline {
        let m = k - 1;
        for i in (0..k).filter(|&i| i != b) {
            vs_baseline.push(test(i, b)?);
        }
        vs_baseline = vs_baseline.into_iter().map(|c| Comparison { result: c.result.with_bonferroni(m), ..c }).collect();
    }

    let mut vs_best = Vec::new();
    if k >= 2 {
        let best = (0..k)
            .filter(|&i| Some(i) != baseline)
            .max_by(|&x, &y| {
                reports[x]
                    .overall
                    .f1_macro
                    .partial_cmp(&reports[y].overall.f1_macro)
                    .expect("finite")
                    .then(y.cmp(&x))
            });
        if let Some(best) = best {
            let m = k - 1;
            for i in (0..k).filter(|&i| i != best) {
                let c = test(i, best)?;
                vs_best.push(Comparison {
                    result: c.result.with_bonferroni(m),
                    ..c
                });
            }
        }
    }

    let m = k * k.saturating_sub(1) / 2;
    let mut pairwise = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let c = test(i, j)?;
            pairwise.push(Comparison {
                result: c.result.with_bonferroni(m),
                ..c
            });
        }
    }

    Ok(EvaluationReport {
        n_items: items.len(),
        detectors: reports,
        vs_baseline,
        vs_best,
        pairwise,
        iterations: options.iterations,
        seed: options.seed,
    })
}

impl EvaluationReport {
    /// One row per detector and source (plus `all`).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("detector,source,n,f1_macro,accuracy,abstentions\n");
        for d in &self.detectors {
            out.push_str(&format!(
                "{},all,{},{:.6},{:.6},{}\n",
                d.detector, d.overall.n, d.overall.f1_macro, d.overall.accuracy, d.abstentions
            ));
            for (source, s) in &d.by_source {
                out.push_str(&format!(
                    "{},{},{},{:.6},{:.6},\n",
                    d.detector, source, s.n, s.f1_macro, s.accuracy
                ));
            }
        }
        out
    }
}
