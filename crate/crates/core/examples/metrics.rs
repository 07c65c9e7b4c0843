//! The four selection metrics plus verbatim text match for a few
//! rewrites of one sentence.

use paraforge::selection::Scorer;
use paraforge::synth::{bundled_synonyms, synthetic_embeddings, SynthConfig};
use paraforge::textmetrics::{text_match, tokenize, Scheme};

fn main() -> anyhow::Result<()> {
    let original = "The method can improve the accuracy of the whole system.";
    let rewrites = [
        ("copy", "The method can improve the accuracy of the whole system."),
        ("spun", "The approach can enhance the precision of the intact system."),
        ("reordered", "The accuracy of the whole system the method can improve."),
        ("unrelated", "Our results are shown in the table."),
    ];
    let table = bundled_synonyms();
    let scorer = Scorer::new(synthetic_embeddings(&table, &SynthConfig::default()));
    let reference = tokenize(original, Scheme::default())?;

    println!("{:<10} {:>9} {:>8} {:>8} {:>6} {:>10}", "rewrite", "sem_match", "lm_like", "rouge_l", "bleu", "text_match");
    for (name, text) in rewrites {
        let m = scorer.score_text(text, original)?;
        let tm = text_match(&tokenize(text, Scheme::default())?, &reference, 3)?;
        println!(
            "{name:<10} {:>9.4} {:>8.4} {:>8.4} {:>6.4} {:>10.4}",
            m.sem_match,
            m.lm_like,
            m.rouge_l,
            m.bleu,
            tm.value()
        );
    }
    Ok(())
}
