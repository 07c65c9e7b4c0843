use proptest::prelude::*;
use serde_json::Value;

use paraforge::detection::{
    self, fewshot_prompt, parse_label, train_multinomial, train_nb, DetectorModel, FeatureVector, ModelFile, Verdict,
};
use paraforge::textmetrics::{Scheme, TokenSeq};

fn fv(values: &[f64]) -> FeatureVector {
    FeatureVector {
        values: values.to_vec(),
        oov_ratio: 0.0,
    }
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

#[test]
fn gaussian_nb_matches_reference_implementation() {
    let oracle: Value = serde_json::from_str(include_str!("oracle/stats_oracle.json")).unwrap();
    let g = &oracle["gaussian_nb"];
    let features: Vec<FeatureVector> = g["points"].as_array().unwrap().iter().map(|p| fv(&floats(p))).collect();
    let labels: Vec<Verdict> = g["labels"]
        .as_array()
        .unwrap()
        .iter()
        .map(|l| if l.as_u64() == Some(0) { Verdict::Machine } else { Verdict::Original })
        .collect();
    let model = train_nb(&features, &labels, 1e-12).unwrap();
    for (k, class) in model.classes.iter().enumerate() {
        assert_eq!(class.label.index(), k);
        for (got, want) in class.means.iter().zip(floats(&g["means"][k])) {
            assert!(close(*got, want, 1e-12), "mean {got} vs {want}");
        }
        for (got, want) in class.variances.iter().zip(floats(&g["variances"][k])) {
            assert!(close(*got, want, 1e-12), "variance {got} vs {want}");
        }
    }
    for (q, query) in g["queries"].as_array().unwrap().iter().enumerate() {
        let feat = fv(&floats(query));
        let joint = model.log_joint(&feat).unwrap();
        let posterior = floats(&g["posterior"][q]);
        for (label, lj) in joint {
            let want = g["log_joint"][q][label.index()].as_f64().unwrap();
            assert!(close(lj, want, 1e-9), "log joint {lj} vs {want}");
        }
        let pred = model.predict(&feat).unwrap();
        let best = if posterior[0] > posterior[1] { 0 } else { 1 };
        assert_eq!(pred.label.index(), best);
        assert!(close(pred.confidence, posterior[best], 1e-9));
    }
}

fn labeled_points() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Verdict>)> {
    (2usize..12, 2usize..12, 1usize..5).prop_flat_map(|(m, o, dim)| {
        let point = prop::collection::vec(-5.0f64..5.0, dim);
        (prop::collection::vec(point.clone(), m), prop::collection::vec(point, o)).prop_map(move |(a, b)| {
            let labels = std::iter::repeat_n(Verdict::Machine, m).chain(std::iter::repeat_n(Verdict::Original, o)).collect();
            (a.into_iter().chain(b).collect(), labels)
        })
    })
}

proptest! {
    #[test]
    fn training_order_is_irrelevant((points, labels) in labeled_points(), probe in prop::collection::vec(-5.0f64..5.0, 4)) {
        let feats: Vec<FeatureVector> = points.iter().map(|p| fv(p)).collect();
        let model = train_nb(&feats, &labels, 1e-6).unwrap();
        let rev_feats: Vec<FeatureVector> = feats.iter().rev().cloned().collect();
        let rev_labels: Vec<Verdict> = labels.iter().rev().copied().collect();
        let reversed = train_nb(&rev_feats, &rev_labels, 1e-6).unwrap();
        let q = fv(&probe[..model.dim()]);
        let (a, b) = (model.predict(&q).unwrap(), reversed.predict(&q).unwrap());
        prop_assert_eq!(a.label, b.label);
        prop_assert!((a.confidence - b.confidence).abs() < 1e-9);
    }

    #[test]
    fn uniform_rescaling_keeps_predictions((points, labels) in labeled_points(),
                                           probe in prop::collection::vec(-5.0f64..5.0, 4),
                                           scale in 0.1f64..10.0) {
        let feats: Vec<FeatureVector> = points.iter().map(|p| fv(p)).collect();
        let scaled: Vec<FeatureVector> = points.iter().map(|p| fv(&p.iter().map(|x| x * scale).collect::<Vec<_>>())).collect();
        let a = train_nb(&feats, &labels, 1e-300).unwrap();
        let b = train_nb(&scaled, &labels, 1e-300).unwrap();
        let q = &probe[..a.dim()];
        let pa = a.predict(&fv(q)).unwrap();
        let pb = b.predict(&fv(&q.iter().map(|x| x * scale).collect::<Vec<_>>())).unwrap();
        prop_assert!((pa.confidence - pb.confidence).abs() < 1e-6, "{} vs {}", pa.confidence, pb.confidence);
        if (pa.confidence - 0.5).abs() > 1e-6 {
            prop_assert_eq!(pa.label, pb.label);
        }
    }

    #[test]
    fn separated_clusters_are_fit_exactly((points, labels) in labeled_points()) {
        // push the two classes far apart along every axis
        let shifted: Vec<FeatureVector> = points
            .iter()
            .zip(&labels)
            .map(|(p, l)| fv(&p.iter().map(|x| if *l == Verdict::Original { x + 100.0 } else { *x }).collect::<Vec<_>>()))
            .collect();
        let model = train_nb(&shifted, &labels, 1e-6).unwrap();
        for (f, l) in shifted.iter().zip(&labels) {
            prop_assert_eq!(model.predict(f).unwrap().label, *l);
        }
    }
}

#[test]
fn saved_models_predict_the_same() {
    let feats = [fv(&[0.0, 0.1]), fv(&[0.2, 0.0]), fv(&[1.0, 1.1]), fv(&[1.3, 0.9])];
    let labels = [Verdict::Machine, Verdict::Machine, Verdict::Original, Verdict::Original];
    let docs: Vec<TokenSeq> = ["a b c", "a a d", "x y z", "x z z"]
        .iter()
        .map(|t| TokenSeq::from_tokens(t.split(' '), Scheme::Whitespace))
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let models = [
        DetectorModel::GaussianNb(train_nb(&feats, &labels, 1e-6).unwrap()),
        DetectorModel::MultinomialNb(train_multinomial(&docs, &labels, 1.0).unwrap()),
    ];
    for (i, model) in models.into_iter().enumerate() {
        let path = dir.path().join(format!("m{i}.json"));
        let file = ModelFile::new(model, Scheme::Whitespace, Some("abc".into()));
        file.save(&path).unwrap();
        let back = ModelFile::load(&path).unwrap();
        assert_eq!(back, file);
        match (&file.model, &back.model) {
            (DetectorModel::GaussianNb(a), DetectorModel::GaussianNb(b)) => {
                let q = fv(&[0.7, 0.4]);
                assert_eq!(a.predict(&q).unwrap(), b.predict(&q).unwrap());
            }
            (DetectorModel::MultinomialNb(a), DetectorModel::MultinomialNb(b)) => {
                let q = TokenSeq::from_tokens(["a", "z", "q"], Scheme::Whitespace);
                assert_eq!(a.predict(&q).unwrap(), b.predict(&q).unwrap());
            }
            _ => unreachable!(),
        }
    }

    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"format": "other", "version": 1}"#).unwrap();
    assert!(ModelFile::load(&path).is_err());
}

#[test]
fn fewshot_prompt_drops_examples_over_budget() {
    let examples = vec![
        ("one two three".to_owned(), Verdict::Original),
        ("four five six".to_owned(), Verdict::Machine),
    ];
    let full = fewshot_prompt("target text", &examples, 2048);
    assert!(full.contains("Label: original") && full.contains("Label: machine-paraphrased"));
    assert!(full.ends_with("Text: target text\nLabel:"));
    let tight = fewshot_prompt("target text", &examples, 20);
    assert!(tight.contains("one two three") && !tight.contains("four five six"));
}

#[test]
fn label_parsing() {
    assert_eq!(parse_label(" Machine-paraphrased."), Some(Verdict::Machine));
    assert_eq!(parse_label("original\n"), Some(Verdict::Original));
    assert_eq!(parse_label("I think it is machine generated"), Some(Verdict::Machine));
    assert_eq!(parse_label("unoriginal"), None);
    assert_eq!(parse_label("no idea"), None);
    assert!(matches!(
        detection::fewshot_detect(&paraforge::generation::MockBackend::fixed("maybe"), "x", &[
            ("a".into(), Verdict::Machine),
            ("b".into(), Verdict::Original)
        ]),
        Err(detection::DetectionError::Unparseable(_))
    ));
}
