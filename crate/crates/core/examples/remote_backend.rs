//! Paraphrasing through an HTTP completion endpoint.
//!
//! Set `PARAFORGE_ENDPOINT` (and `PARAFORGE_API_KEY` if needed) to call a
//! real service; without it the example only prints the request it would
//! send.

use paraforge::generation::{paraphrase, render_body, render_prompt, GenParams, PromptSpec, RemoteBackend, RemoteConfig};

fn main() -> anyhow::Result<()> {
    let original = "Plagiarism detection systems struggle with machine-paraphrased text.";
    let spec = PromptSpec::new(original);
    let params = GenParams {
        candidates_per_original: 2,
        ..GenParams::default()
    };
    let template = r#"{"model": "any", "prompt": {{prompt}}, "max_tokens": {{max_tokens}}, "temperature": {{temperature}}}"#;

    let Ok(endpoint) = std::env::var("PARAFORGE_ENDPOINT") else {
        let prompt = render_prompt(&spec)?.text;
        let body = render_body(template, &prompt, params.max_new_tokens(original.split_whitespace().count()), params.temperature);
        println!("PARAFORGE_ENDPOINT is not set; request body would be:\n{body}");
        return Ok(());
    };
    let backend = RemoteBackend::new(RemoteConfig {
        endpoint,
        body_template: template.into(),
        response_path: "choices/0/text".into(),
        requests_per_minute: 30,
        timeout_secs: 60,
    });
    let out = paraphrase(&backend, original, &params, &spec)?;
    for c in out.candidates {
        println!("- {c}");
    }
    Ok(())
}
