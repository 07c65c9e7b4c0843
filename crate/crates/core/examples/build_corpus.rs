//! Builds a small aligned corpus from synthetic originals with the synonym
//! spinner and writes it to a directory.
//!
//! ```text
//! cargo run --example build_corpus -- out/corpus
//! ```

use paraforge::corpus::{build_pairs, BuildOptions, Corpus};
use paraforge::generation::{GenParams, PromptSpec, SpinPolicy, SpinnerBackend};
use paraforge::selection::Scorer;
use paraforge::synth::{bundled_synonyms, synthetic_embeddings, synthetic_originals, SynthConfig};

fn main() -> anyhow::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "out/corpus".into());
    let table = bundled_synonyms();
    let cfg = SynthConfig::default();
    let originals = synthetic_originals(30, &table, &cfg);
    let scorer = Scorer::new(synthetic_embeddings(&table, &cfg));
    let backend = SpinnerBackend::new(SpinPolicy::probability(0.3, table));
    let params = GenParams {
        candidates_per_original: 4,
        ..GenParams::default()
    };

    let outcome = build_pairs(&originals, &backend, &params, &PromptSpec::new("-"), &scorer, &BuildOptions::default())?;
    let corpus = Corpus::new(outcome.pairs);
    corpus.save(&dir)?;

    let n = corpus.pairs.len() as f64;
    let mean = |f: fn(&paraforge::selection::MetricVector) -> f64| corpus.pairs.iter().map(|p| f(&p.metrics)).sum::<f64>() / n;
    println!("{} pairs written to {dir}", corpus.pairs.len());
    println!(
        "mean sem_match {:.3}, lm_like {:.3}, rouge_l {:.3}, bleu {:.3}",
        mean(|m| m.sem_match),
        mean(|m| m.lm_like),
        mean(|m| m.rouge_l),
        mean(|m| m.bleu)
    );
    let first = &corpus.pairs[0];
    println!("\n{}\n->\n{}", first.original.text, first.paraphrase.text);
    Ok(())
}
