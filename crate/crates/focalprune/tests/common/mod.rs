#![allow(dead_code)]

pub mod oracle;

use focalprune_core::PredictionDataset;
use oracle::Log;
use rand::Rng;

/// Random log where model `m` is right with its own probability in
/// `[lo, hi]` and otherwise picks a uniformly random wrong label.
pub fn random_log<R: Rng>(rng: &mut R, m: usize, n: usize, classes: u32, lo: f64, hi: f64) -> Log {
    let truth: Vec<u32> = (0..n).map(|_| rng.random_range(0..classes)).collect();
    let preds = (0..m)
        .map(|_| {
            let acc = rng.random_range(lo..=hi);
            truth
                .iter()
                .map(|&t| {
                    if rng.random_bool(acc) {
                        t
                    } else {
                        (t + rng.random_range(1..classes)) % classes
                    }
                })
                .collect()
        })
        .collect();
    Log {
        truth,
        preds,
        classes,
    }
}

pub fn to_dataset(log: &Log) -> PredictionDataset {
    let names = (0..log.models()).map(|i| format!("m{i}")).collect();
    PredictionDataset::new(
        names,
        None,
        log.truth.clone(),
        log.preds.clone(),
        Some(log.classes),
    )
    .unwrap()
}

pub fn to_log(ds: &PredictionDataset) -> Log {
    Log {
        truth: ds.truth().to_vec(),
        preds: (0..ds.num_models())
            .map(|m| ds.predictions(m).to_vec())
            .collect(),
        classes: ds.num_classes(),
    }
}

/// The three-model fixture used throughout the docs and tests.
pub fn fixture() -> Log {
    Log {
        truth: vec![0, 1, 0, 1, 2],
        preds: vec![
            vec![0, 1, 0, 1, 2],
            vec![0, 1, 0, 0, 0],
            vec![1, 1, 0, 1, 2],
        ],
        classes: 3,
    }
}
