//! Trains the embedding naive Bayes detector on spun text and compares it
//! with random guessing and verbatim text matching on a held-out part.

use paraforge::cli::{labeled_docs, split_pairs};
use paraforge::corpus::{build_pairs, BuildOptions, Corpus};
use paraforge::detection::{Detector, EmbeddingNbDetector, RandomDetector, TextMatchDetector};
use paraforge::evaluation::{evaluate, EvalItem, EvalOptions};
use paraforge::generation::{GenParams, PromptSpec, SpinPolicy, SpinnerBackend};
use paraforge::selection::Scorer;
use paraforge::synth::{bundled_synonyms, synthetic_embeddings, synthetic_originals, SynthConfig};
use paraforge::textmetrics::Scheme;

fn main() -> anyhow::Result<()> {
    let table = bundled_synonyms();
    let cfg = SynthConfig::default();
    let emb = synthetic_embeddings(&table, &cfg);
    let originals = synthetic_originals(400, &table, &cfg);
    let backend = SpinnerBackend::new(SpinPolicy::every_kth(4, table));
    let params = GenParams {
        candidates_per_original: 1,
        ..GenParams::default()
    };
    let scorer = Scorer::new(emb.clone());
    let pairs = build_pairs(&originals, &backend, &params, &PromptSpec::new("-"), &scorer, &BuildOptions::default())?.pairs;
    let split = split_pairs(&pairs, [0.7, 0.0, 0.3], 7)?;
    let corpus = Corpus::new(pairs);

    let train = labeled_docs(&corpus, &split, "train");
    let texts: Vec<&str> = train.iter().map(|(d, _)| d.text.as_str()).collect();
    let labels: Vec<_> = train.iter().map(|(_, l)| *l).collect();
    let nb = EmbeddingNbDetector::train(&texts, &labels, emb, Scheme::default(), 1e-6)?;
    let sources: Vec<&str> = corpus.pairs.iter().map(|p| p.original.text.as_str()).collect();
    let matcher = TextMatchDetector::new(&sources, Scheme::default())?;
    let random = RandomDetector { seed: 0 };

    let items: Vec<EvalItem> = labeled_docs(&corpus, &split, "test")
        .into_iter()
        .map(|(d, truth)| EvalItem {
            text: d.text.clone(),
            truth,
            source: d.source,
        })
        .collect();
    let detectors: [&dyn Detector; 3] = [&random, &nb, &matcher];
    let report = evaluate(&items, &detectors, &EvalOptions::default())?;
    print!("{}", report.to_csv());
    for c in &report.vs_baseline {
        println!("{} vs {}: p = {:.4} (corrected {:?})", c.a, c.b, c.result.p_value, c.result.corrected);
    }
    Ok(())
}
