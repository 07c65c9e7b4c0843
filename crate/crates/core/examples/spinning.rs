//! Synonym spinning in both modes with the bundled table.

use paraforge::generation::{spin, SpinPolicy};
use paraforge::synth::bundled_synonyms;

fn main() -> anyhow::Result<()> {
    let text = "We show that the proposed method can improve results, and we describe its main limitations.";
    let table = bundled_synonyms();
    println!("original      {text}");
    for k in [4, 2, 1] {
        println!("{:<13} {}", format!("every {k}"), spin(text, &SpinPolicy::every_kth(k, table.clone()), 0)?);
    }
    for seed in [1, 2] {
        println!("p=0.5 seed {seed}  {}", spin(text, &SpinPolicy::probability(0.5, table.clone()), seed)?);
    }
    Ok(())
}
