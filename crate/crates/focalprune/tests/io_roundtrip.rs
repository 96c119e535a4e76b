use std::fs;
use std::path::Path;

use focalprune::io::{load_predictions, parse_predictions, to_canonical_csv, write_dataset};
use focalprune_core::simulation::{generate_synthetic, SyntheticSpec};
use focalprune_core::PredictionDataset;
use proptest::prelude::*;

fn synthetic(confidences: bool) -> PredictionDataset {
    generate_synthetic(&SyntheticSpec {
        num_models: 4,
        num_samples: 60,
        num_classes: 5,
        accuracies: vec![0.5, 0.6, 0.7, 0.8],
        overlap: 0.4,
        cliques: Some(vec![0, 0, 1, 2]),
        confidences,
        seed: 12,
    })
    .unwrap()
}

#[test]
fn canonical_form_is_a_fixed_point() {
    let ds = synthetic(false);
    let text = to_canonical_csv(&ds);
    let back = parse_predictions(text.as_bytes(), Path::new("x.csv"), None).unwrap();
    assert_eq!(back, ds);
    assert_eq!(to_canonical_csv(&back), text);
}

#[test]
fn confidences_survive_a_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synthetic(true);
    let data = dir.path().join("d.csv");
    let conf = dir.path().join("conf");
    write_dataset(&ds, &data, Some(&conf)).unwrap();
    let a = load_predictions(&data, Some(&conf), None).unwrap();
    assert_eq!(a.dataset, ds);

    // same bytes, same hash; touching one confidence file changes it
    let b = load_predictions(&data, Some(&conf), None).unwrap();
    assert_eq!(a.content_hash, b.content_hash);
    let without = load_predictions(&data, None, None).unwrap();
    assert_ne!(a.content_hash, without.content_hash);
    let f = conf.join("m0.csv");
    let mut text = fs::read_to_string(&f).unwrap();
    text.push('\n');
    fs::write(&f, text).unwrap();
    assert_ne!(
        load_predictions(&data, Some(&conf), None)
            .unwrap()
            .content_hash,
        a.content_hash
    );
}

#[test]
fn directive_and_comments() {
    let text = "# produced by hand\n# classes=6\nsample_id,truth,a,b\nq,5,5,0\nr,0,1,0\n";
    let ds = parse_predictions(text.as_bytes(), Path::new("x.csv"), None).unwrap();
    assert_eq!(ds.num_classes(), 6);
    assert_eq!(ds.sample_ids(), ["q", "r"]);
    let err = parse_predictions(
        "# classes=5\nsample_id,truth,a,b\nq,5,5,0\n".as_bytes(),
        Path::new("x.csv"),
        None,
    )
    .unwrap_err()
    .to_string();
    assert!(err.starts_with("x.csv:3:"), "{err}");
}

#[test]
fn missing_confidence_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synthetic(true);
    let data = dir.path().join("d.csv");
    let conf = dir.path().join("conf");
    write_dataset(&ds, &data, Some(&conf)).unwrap();
    fs::remove_file(conf.join("m2.csv")).unwrap();
    let err = load_predictions(&data, Some(&conf), None)
        .unwrap_err()
        .to_string();
    assert!(err.contains("m2.csv"), "{err}");
}

proptest! {
    #[test]
    fn arbitrary_logs_round_trip(
        rows in proptest::collection::vec(proptest::collection::vec(0u32..7, 4), 1..30)
    ) {
        let truth: Vec<u32> = rows.iter().map(|r| r[0]).collect();
        let preds: Vec<Vec<u32>> = (1..4).map(|m| rows.iter().map(|r| r[m]).collect()).collect();
        let names = vec!["alpha".to_string(), "beta".into(), "gamma".into()];
        let ds = PredictionDataset::new(names, None, truth, preds, None).unwrap();
        let text = to_canonical_csv(&ds);
        let back = parse_predictions(text.as_bytes(), Path::new("p.csv"), None).unwrap();
        prop_assert_eq!(&back, &ds);
        prop_assert_eq!(to_canonical_csv(&back), text);
    }
}
