//! In-context detection through the backend interface. A toy backend
//! stands in for a language model: it answers "machine-paraphrased" when
//! the text under test contains a known spinner synonym.

use std::collections::HashSet;

use paraforge::detection::{fewshot_prompt, Detector, FewShotDetector, Verdict};
use paraforge::generation::{spin, Backend, BackendError, CompletionRequest, SpinPolicy};
use paraforge::synth::{bundled_synonyms, synthetic_originals, SynthConfig};

struct SynonymSniffer {
    synonyms: HashSet<String>,
}

impl Backend for SynonymSniffer {
    fn identity(&self) -> String {
        "sniffer".into()
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        let text = request
            .prompt
            .rsplit("Text: ")
            .next()
            .and_then(|t| t.strip_suffix("\nLabel:"))
            .ok_or_else(|| BackendError::Permanent("unexpected prompt".into()))?;
        let spun = text
            .split_whitespace()
            .any(|w| self.synonyms.contains(&w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase()));
        Ok(if spun { " machine-paraphrased" } else { " original" }.into())
    }
}

fn main() -> anyhow::Result<()> {
    let table = bundled_synonyms();
    let policy = SpinPolicy::every_kth(3, table.clone());
    let docs = synthetic_originals(6, &table, &SynthConfig::default());
    let examples = vec![
        (docs[0].text.clone(), Verdict::Original),
        (spin(&docs[1].text, &policy, 0)?, Verdict::Machine),
    ];
    let backend = SynonymSniffer {
        synonyms: table.iter().map(|(_, s)| s.to_lowercase()).collect(),
    };
    let detector = FewShotDetector::new(backend, examples.clone())?;

    let prompt = fewshot_prompt("<text under test>", &examples, 2048);
    println!("prompt tail: ...{}", &prompt[prompt.len() - 60..]);
    for doc in &docs[2..] {
        for (truth, text) in [(Verdict::Original, doc.text.clone()), (Verdict::Machine, spin(&doc.text, &policy, 0)?)] {
            let p = detector.predict(&text)?;
            println!("{} truth {truth:<8} predicted {}", doc.id, p.label);
        }
    }
    Ok(())
}
