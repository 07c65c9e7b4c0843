//! Few-shot prompt rendering under a token budget, and the generation cap
//! derived from the original's length.

use paraforge::generation::{budget_tokens, paraphrase, render_prompt, ExamplePair, GenParams, MockBackend, PromptSpec};

fn main() -> anyhow::Result<()> {
    let target = "This text was written by a machine and then lightly edited.";
    let examples = vec![
        ExamplePair::new("My day has been pretty good.", "Today was a good day."),
        ExamplePair::new("This paper analyses two paraphrasing methods.", "We analyze two methods in this study."),
        ExamplePair::new("The results were surprising to everyone.", "Nobody expected these results."),
    ];
    let spec = PromptSpec::new(target).with_examples(examples);
    let full = render_prompt(&spec)?;
    println!("{}\n---", full.text);
    println!("{} tokens, {} examples", full.tokens, full.examples_used);

    for budget in [40, 30, 20] {
        let r = render_prompt(&spec.clone().with_budget(budget))?;
        println!("budget {budget}: {} tokens, {} examples", r.tokens, r.examples_used);
    }

    let params = GenParams::default();
    let out = paraphrase(&MockBackend::shuffle(), target, &params, &spec)?;
    println!(
        "cap {} for a {}-token original; first candidate: {}",
        out.max_new_tokens,
        budget_tokens(target),
        out.candidates[0]
    );
    Ok(())
}
