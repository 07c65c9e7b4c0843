//! Scores a handful of candidate paraphrases and picks one from the
//! Pareto frontier.

use paraforge::selection::{pareto_frontier, select_candidate, CandidateSet, Scorer};
use paraforge::synth::{bundled_synonyms, synthetic_embeddings, SynthConfig};

fn main() -> anyhow::Result<()> {
    let original = "We describe a simple method to measure the quality of each result.";
    let candidates = [
        "We describe a simple method to measure the quality of each result.",
        "We depict a basic approach to gauge the caliber of each outcome.",
        "We describe a basic method to measure the quality of each outcome.",
        "A simple method to measure each result is what we describe.",
        "Results are good.",
    ];
    let scorer = Scorer::new(synthetic_embeddings(&bundled_synonyms(), &SynthConfig::default()));
    let set = CandidateSet::score("1-ORIG-0", original, &candidates, &scorer)?;
    let frontier = pareto_frontier(&set.vectors());
    let chosen = select_candidate(&set).expect("at least one candidate");

    for (i, c) in set.candidates.iter().enumerate() {
        let mark = match (i == chosen, frontier.contains(&i)) {
            (true, _) => "*",
            (false, true) => "+",
            _ => " ",
        };
        let m = c.metrics;
        println!(
            "{mark} [{i}] sem {:.3} lm {:.3} rouge {:.3} bleu {:.3}  {}",
            m.sem_match, m.lm_like, m.rouge_l, m.bleu, c.text
        );
    }
    println!("frontier {frontier:?}, selected {chosen}");
    Ok(())
}
