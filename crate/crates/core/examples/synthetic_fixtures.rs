//! Writes seeded synthetic originals as JSONL.
//!
//! ```text
//! cargo run --example synthetic_fixtures -- 60 data/originals.jsonl
//! ```

use std::io::Write;

use paraforge::synth::{bundled_synonyms, synthetic_embeddings, synthetic_originals, SynthConfig};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(60);
    let table = bundled_synonyms();
    let cfg = SynthConfig::default();
    let docs = synthetic_originals(n, &table, &cfg);

    let mut out: Box<dyn Write> = match args.next() {
        Some(path) => Box::new(std::fs::File::create(path)?),
        None => Box::new(std::io::stdout().lock()),
    };
    for doc in &docs {
        serde_json::to_writer(&mut out, doc)?;
        writeln!(out)?;
    }
    let emb = synthetic_embeddings(&table, &cfg);
    eprintln!("{n} originals; {} embedded words, dim {}, digest {}", emb.len(), emb.dim(), &emb.digest()[..12]);
    Ok(())
}
