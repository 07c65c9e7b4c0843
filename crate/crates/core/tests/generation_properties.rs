use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::thread;

use proptest::prelude::*;

use paraforge::generation::{
    budget_tokens, build_prompt, paraphrase, render_prompt, spin, truncate_completion, ExamplePair, GenParams,
    GenerationError, MockBackend, PromptSpec, RemoteBackend, RemoteConfig, SpinPolicy,
};
use paraforge::synth::{bundled_synonyms, synthetic_originals, SynthConfig};

#[test]
fn golden_fewshot_prompt() {
    let spec = PromptSpec::new("This text was written by a machine.")
        .with_instruction("Rephrase the following paragraph while keeping its meaning:")
        .with_examples(vec![
            ExamplePair::new("My day has been pretty good.", "Today was a good day."),
            ExamplePair::new("This paper analyses two paraphrasing methods.", "We analyze two methods in this study."),
        ]);
    let golden = include_str!("golden/fewshot_prompt.txt");
    assert_eq!(build_prompt(&spec).unwrap(), golden);
}

fn words(max: usize) -> impl Strategy<Value = String> {
    prop::collection::vec("[a-z]{1,6}", 1..=max).prop_map(|w| w.join(" "))
}

proptest! {
    #[test]
    fn prompt_respects_budget(target in words(30),
                              pairs in prop::collection::vec((words(40), words(40)), 0..12),
                              budget in 10usize..300) {
        let spec = PromptSpec::new(target)
            .with_examples(pairs.iter().map(|(o, p)| ExamplePair::new(o.clone(), p.clone())).collect())
            .with_budget(budget);
        match render_prompt(&spec) {
            Ok(r) => {
                prop_assert!(r.tokens <= budget);
                prop_assert_eq!(budget_tokens(&r.text), r.tokens);
                // the examples used are always a leading run of the list
                let mut rest = r.text.strip_prefix(&format!("{}\n\n", spec.instruction)).unwrap();
                for (o, p) in &pairs[..r.examples_used] {
                    let block = format!("Original: {o}\nParaphrased: {p}\n\n");
                    rest = rest.strip_prefix(&block).ok_or_else(|| TestCaseError::fail("example out of order"))?;
                }
                prop_assert_eq!(rest, format!("Original: {}\nParaphrased:", spec.target));
                if let Some((o, p)) = pairs.get(r.examples_used) {
                    let next = budget_tokens(o) + budget_tokens(p) + 2;
                    prop_assert!(r.tokens + next > budget);
                }
            }
            Err(GenerationError::BudgetExceeded { needed, .. }) => prop_assert!(needed > budget),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }

    #[test]
    fn truncation_caps_tokens(text in "[a-z \n]{0,200}", cap in 0usize..20) {
        let out = truncate_completion(&text, cap);
        prop_assert!(budget_tokens(&out) <= cap);
        prop_assert!(!out.contains("\n\n"));
    }

    #[test]
    fn mock_paraphrases_stay_under_cap(target in words(40).prop_filter("cap of one-word text is zero", |t| budget_tokens(t) > 1), seed in any::<u64>()) {
        let params = GenParams { seed, ..GenParams::default() };
        let spec = PromptSpec::new("unused");
        let a = paraphrase(&MockBackend::shuffle(), &target, &params, &spec).unwrap();
        let b = paraphrase(&MockBackend::shuffle(), &target, &params, &spec).unwrap();
        prop_assert_eq!(&a, &b);
        let cap = params.max_new_tokens(budget_tokens(&target));
        prop_assert_eq!(a.max_new_tokens, cap);
        for c in &a.candidates {
            prop_assert!(budget_tokens(c) <= cap);
        }
    }
}

#[test]
fn spinning_twice_changes_nothing_more() {
    let table = bundled_synonyms();
    let docs = synthetic_originals(30, &table, &SynthConfig::default());
    for period in 1..=5 {
        let policy = SpinPolicy::every_kth(period, table.clone());
        for doc in &docs {
            let once = spin(&doc.text, &policy, 0).unwrap();
            assert_eq!(spin(&once, &policy, 0).unwrap(), once);
        }
    }
}

#[test]
fn spinning_at_every_token_replaces_known_words() {
    let table = bundled_synonyms();
    let doc = &synthetic_originals(1, &table, &SynthConfig::default())[0];
    let spun = spin(&doc.text, &SpinPolicy::every_kth(1, table.clone()), 0).unwrap();
    assert_eq!(budget_tokens(&spun), budget_tokens(&doc.text));
    assert_ne!(spun, doc.text);
}

struct Seen {
    authorization: Option<String>,
    body: String,
}

/// Serves one canned `(status, body)` per connection and reports what it saw.
fn fake_server(responses: Vec<(u16, String)>) -> (String, mpsc::Receiver<Seen>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/complete", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for (status, body) in responses {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut authorization = None;
            let mut length = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                if let Some((k, v)) = line.split_once(':') {
                    match k.to_ascii_lowercase().as_str() {
                        "authorization" => authorization = Some(v.trim().to_owned()),
                        "content-length" => length = v.trim().parse().unwrap(),
                        _ => {}
                    }
                }
            }
            let mut buf = vec![0; length];
            reader.read_exact(&mut buf).unwrap();
            tx.send(Seen { authorization, body: String::from_utf8(buf).unwrap() }).unwrap();
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (url, rx)
}

fn remote(endpoint: String) -> RemoteBackend {
    RemoteBackend::with_api_key(
        RemoteConfig {
            endpoint,
            body_template: r#"{"prompt": {{prompt}}, "max_tokens": {{max_tokens}}}"#.into(),
            response_path: "choices/0/text".into(),
            requests_per_minute: 600,
            timeout_secs: 10,
        },
        Some("sk-test".into()),
    )
}

#[test]
fn remote_retries_rate_limits_and_truncates() {
    let ok = r#"{"choices": [{"text": " one two three four five six seven eight nine ten eleven\n\nextra words"}]}"#;
    let (url, seen) = fake_server(vec![(429, "{}".into()), (200, ok.into())]);
    let params = GenParams {
        candidates_per_original: 1,
        retry_backoff_ms: 1,
        ..GenParams::default()
    };
    let original = "a b c d e f g h i j";
    let out = paraphrase(&remote(url), original, &params, &PromptSpec::new("x")).unwrap();
    assert_eq!(out.candidates, vec!["one two three four five six seven eight nine"]);

    let first = seen.recv().unwrap();
    let second = seen.recv().unwrap();
    assert_eq!(first.authorization.as_deref(), Some("Bearer sk-test"));
    assert_eq!(first.body, second.body);
    let body: serde_json::Value = serde_json::from_str(&first.body).unwrap();
    assert_eq!(body["max_tokens"], 9);
    assert!(body["prompt"].as_str().unwrap().ends_with("Original: a b c d e f g h i j\nParaphrased:"));
}

#[test]
fn remote_client_errors_are_not_retried() {
    let (url, seen) = fake_server(vec![(400, r#"{"error": "bad"}"#.into())]);
    let params = GenParams {
        candidates_per_original: 1,
        retry_backoff_ms: 1,
        ..GenParams::default()
    };
    let err = paraphrase(&remote(url), "some text here", &params, &PromptSpec::new("x")).unwrap_err();
    assert!(matches!(err, GenerationError::Backend { ref message, .. } if message.contains("400")), "{err}");
    seen.recv().unwrap();
    assert!(seen.try_recv().is_err());
}
