//! Full analysis of the bundled human-study fixture: filters, duration
//! outliers, per-system accuracy against a control, agreement and Likert
//! summaries.

use std::collections::HashMap;

use paraforge::annotations::{analyze, load_annotations, AnalysisOptions};

fn main() -> anyhow::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/annotations.jsonl").into());
    let records = load_annotations(&path)?;
    let options = AnalysisOptions {
        control: Some("spinnerchief".into()),
        ..AnalysisOptions::default()
    };
    let report = analyze(records, &HashMap::new(), &options)?;

    println!(
        "{} records, {} rejected, outliers {:?}",
        report.records,
        report.rejected.len(),
        report.duration_outliers
    );
    println!("mean participant accuracy {:.3}", report.mean_participant_accuracy);
    for s in &report.systems {
        let test = s
            .vs_control
            .map(|r| format!("t {:+.2}, p_bonf {:.4}", r.statistic, r.corrected.unwrap_or(r.p_value)))
            .unwrap_or_default();
        println!(
            "{:<13} acc {:.3} [{:.3}, {:.3}]  dk {:.3}  {test}",
            s.system, s.ci.mean, s.ci.lo, s.ci.hi, s.dont_know_ratio
        );
    }
    if let Some(a) = report.agreement {
        println!("fleiss kappa {:.3} over {} items", a.kappa, a.n_items);
    }
    for (system, row) in &report.likert.cells {
        let cells: Vec<String> = row.iter().map(|(d, c)| format!("{d:?} {:.2}±{:.2}", c.mean, c.std)).collect();
        println!("{system:<13} {}", cells.join("  "));
    }
    for w in &report.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
