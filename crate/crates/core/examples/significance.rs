//! Significance tests used in evaluation: paired permutation (exact and
//! sampled), Welch's t-test, confidence intervals, Bonferroni.

use paraforge::evaluation::{bonferroni, mean_ci, permutation_test, t_test_two_sample};

fn main() -> anyhow::Result<()> {
    // per-item correctness of two detectors on the same 12 items
    let a = [1., 1., 1., 0., 1., 1., 1., 1., 0., 1., 1., 1.];
    let b = [0., 1., 0., 0., 1., 0., 1., 0., 0., 1., 0., 1.];
    let exact = permutation_test(&a, &b, 10_000, 0)?;
    println!("paired, n = 12: diff {:.3}, p = {:.5} ({:?})", exact.statistic, exact.p_value, exact.method);

    let long_a: Vec<f64> = (0..200).map(|i| if i % 5 == 0 { 0.0 } else { 1.0 }).collect();
    let long_b: Vec<f64> = (0..200).map(|i| if i % 3 == 0 { 0.0 } else { 1.0 }).collect();
    let sampled = permutation_test(&long_a, &long_b, 10_000, 0)?;
    println!("paired, n = 200: diff {:.3}, p = {:.5} ({:?})", sampled.statistic, sampled.p_value, sampled.method);

    let control = [0.82, 0.79, 0.91, 0.75, 0.88, 0.70];
    let system = [0.55, 0.61, 0.49, 0.66, 0.52];
    let t = t_test_two_sample(&control, &system)?;
    println!("welch t = {:.4}, p = {:.3e}", t.statistic, t.p_value);

    let ci = mean_ci(&system, 0.95)?;
    println!("system mean {:.3}, 95% CI [{:.3}, {:.3}]", ci.mean, ci.lo, ci.hi);
    println!("bonferroni over 4 tests: {:?}", bonferroni(&[0.01, 0.02, 0.2, 0.5], 4));
    Ok(())
}
