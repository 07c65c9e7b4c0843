use serde::{Deserialize, Serialize};

use super::GenerationError;

/// Instruction shipped as the default few-shot prompt header.
pub const DEFAULT_INSTRUCTION: &str = "Rephrase the following sentence.";
pub const DEFAULT_CONTEXT_BUDGET: usize = 2048;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamplePair {
    pub original: String,
    pub paraphrased: String,
}

impl ExamplePair {
    pub fn new(original: impl Into<String>, paraphrased: impl Into<String>) -> Self {
        Self {
            original: original.into(),
            paraphrased: paraphrased.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptSpec {
    pub instruction: String,
    pub example_pairs: Vec<ExamplePair>,
    pub target: String,
    pub context_budget_tokens: usize,
}

impl PromptSpec {
    pub fn new(target: impl Into<String>) -> Self {
        Self {
            instruction: DEFAULT_INSTRUCTION.to_owned(),
            example_pairs: Vec::new(),
            target: target.into(),
            context_budget_tokens: DEFAULT_CONTEXT_BUDGET,
        }
    }

    pub fn with_examples(mut self, pairs: Vec<ExamplePair>) -> Self {
        self.example_pairs = pairs;
        self
    }

    pub fn with_instruction(mut self, instruction: impl Into<String>) -> Self {
        self.instruction = instruction.into();
        self
    }

    pub fn with_budget(mut self, tokens: usize) -> Self {
        self.context_budget_tokens = tokens;
        self
    }
}

/// Whitespace token count, the unit of the context budget.
pub fn budget_tokens(text: &str) -> usize {
    text.split_whitespace().count()
}

fn block(original: &str, paraphrased: &str) -> String {
    format!("Original: {original}\nParaphrased: {paraphrased}\n\n")
}

/// A rendered prompt and how many example pairs made it in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedPrompt {
    pub text: String,
    pub examples_used: usize,
    pub tokens: usize,
}

/// Renders `instruction`, a blank line, as many leading example pairs as
/// fit the budget, and the open `Original: <target>\nParaphrased:` slot.
pub fn render_prompt(spec: &PromptSpec) -> Result<RenderedPrompt, GenerationError> {
    if spec.instruction.trim().is_empty() {
        return Err(GenerationError::InvalidPrompt("instruction is empty".into()));
    }
    if spec.target.trim().is_empty() {
        return Err(GenerationError::InvalidPrompt("target is empty".into()));
    }
    let head = format!("{}\n\n", spec.instruction);
    let tail = format!("Original: {}\nParaphrased:", spec.target);
    let mut used = budget_tokens(&head) + budget_tokens(&tail);
    if used > spec.context_budget_tokens {
        return Err(GenerationError::BudgetExceeded {
            needed: used,
            budget: spec.context_budget_tokens,
        });
    }
    let mut text = head;
    let mut examples_used = 0;
    for pair in &spec.example_pairs {
        let b = block(&pair.original, &pair.paraphrased);
        let cost = budget_tokens(&b);
        if used + cost > spec.context_budget_tokens {
            break;
        }
        used += cost;
        text.push_str(&b);
        examples_used += 1;
    }
    text.push_str(&tail);
    Ok(RenderedPrompt {
        text,
        examples_used,
        tokens: used,
    })
}

pub fn build_prompt(spec: &PromptSpec) -> Result<String, GenerationError> {
    render_prompt(spec).map(|r| r.text)
}

/// Recovers the open target from a rendered prompt: the text after the
/// last `Original: ` up to the closing `\nParaphrased:`.
pub fn extract_target(prompt: &str) -> Option<&str> {
    let body = prompt.strip_suffix("\nParaphrased:")?;
    let start = body.rfind("Original: ")? + "Original: ".len();
    Some(&body[start..])
}
