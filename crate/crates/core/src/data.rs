//! Prediction logs and the matrices derived from them.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::team::MAX_MODELS;

/// Tolerance on confidence rows summing to one.
pub const CONFIDENCE_SUM_TOLERANCE: f64 = 1e-6;

/// Ground truth plus every member model's predicted label for every sample.
///
/// Immutable after construction; all invariants are checked by
/// [`PredictionDataset::new`] and [`PredictionDataset::with_confidences`].
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionDataset {
    model_names: Vec<String>,
    sample_ids: Vec<String>,
    num_classes: u32,
    truth: Vec<u32>,
    predictions: Vec<Vec<u32>>,
    // model-major, then sample, then class
    confidences: Option<Vec<f64>>,
}

impl PredictionDataset {
    /// Validates and builds a dataset.
    ///
    /// `sample_ids` defaults to `"0".."N-1"`. `num_classes` defaults to one
    /// more than the largest label seen (at least 2).
    pub fn new(
        model_names: Vec<String>,
        sample_ids: Option<Vec<String>>,
        truth: Vec<u32>,
        predictions: Vec<Vec<u32>>,
        num_classes: Option<u32>,
    ) -> Result<Self> {
        let m = model_names.len();
        let n = truth.len();
        if m < 2 {
            return Err(Error::InvalidDataset(alloc::format!(
                "need at least 2 models, got {m}"
            )));
        }
        if m > MAX_MODELS {
            return Err(Error::InvalidDataset(alloc::format!(
                "at most {MAX_MODELS} models are supported, got {m}"
            )));
        }
        if n == 0 {
            return Err(Error::InvalidDataset("need at least 1 sample".into()));
        }
        if predictions.len() != m {
            return Err(Error::InvalidDataset(alloc::format!(
                "{} prediction rows for {m} models",
                predictions.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for name in &model_names {
            if name.is_empty() {
                return Err(Error::InvalidDataset("empty model name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidDataset(alloc::format!(
                    "duplicate model name {name:?}"
                )));
            }
        }
        for (name, row) in model_names.iter().zip(&predictions) {
            if row.len() != n {
                return Err(Error::InvalidDataset(alloc::format!(
                    "model {name:?} has {} predictions for {n} samples",
                    row.len()
                )));
            }
        }
        let sample_ids = match sample_ids {
            Some(ids) => {
                if ids.len() != n {
                    return Err(Error::InvalidDataset(alloc::format!(
                        "{} sample ids for {n} samples",
                        ids.len()
                    )));
                }
                let mut seen = BTreeSet::new();
                for id in &ids {
                    if !seen.insert(id.as_str()) {
                        return Err(Error::InvalidDataset(alloc::format!(
                            "duplicate sample_id {id:?}"
                        )));
                    }
                }
                ids
            }
            None => (0..n).map(|i| alloc::format!("{i}")).collect(),
        };

        let max_label = truth
            .iter()
            .chain(predictions.iter().flatten())
            .copied()
            .max()
            .unwrap_or(0);
        let num_classes = num_classes.unwrap_or((max_label + 1).max(2));
        if num_classes < 2 {
            return Err(Error::InvalidDataset(alloc::format!(
                "need at least 2 classes, got {num_classes}"
            )));
        }
        for (s, &label) in truth.iter().enumerate() {
            if label >= num_classes {
                return Err(Error::LabelOutOfRange {
                    model: "truth".into(),
                    sample: s,
                    label,
                    classes: num_classes,
                });
            }
        }
        for (name, row) in model_names.iter().zip(&predictions) {
            if let Some((s, &label)) = row.iter().enumerate().find(|(_, &l)| l >= num_classes) {
                return Err(Error::LabelOutOfRange {
                    model: name.clone(),
                    sample: s,
                    label,
                    classes: num_classes,
                });
            }
        }
        Ok(PredictionDataset {
            model_names,
            sample_ids,
            num_classes,
            truth,
            predictions,
            confidences: None,
        })
    }

    /// Attaches an `M x N x C` confidence tensor (model-major).
    ///
    /// Every length-`C` row must sum to one within
    /// [`CONFIDENCE_SUM_TOLERANCE`] and peak at the model's predicted label.
    pub fn with_confidences(mut self, confidences: Vec<f64>) -> Result<Self> {
        let (m, n, c) = (
            self.num_models(),
            self.num_samples(),
            self.num_classes as usize,
        );
        if confidences.len() != m * n * c {
            return Err(Error::InvalidDataset(alloc::format!(
                "confidence tensor has {} entries, expected {m}x{n}x{c}",
                confidences.len()
            )));
        }
        for model in 0..m {
            for s in 0..n {
                let row = &confidences[(model * n + s) * c..(model * n + s + 1) * c];
                check_confidence_row(row, self.predictions[model][s]).map_err(|msg| {
                    Error::InvalidDataset(alloc::format!(
                        "model {:?} sample {:?}: {msg}",
                        self.model_names[model],
                        self.sample_ids[s]
                    ))
                })?;
            }
        }
        self.confidences = Some(confidences);
        Ok(self)
    }

    pub fn num_models(&self) -> usize {
        self.model_names.len()
    }

    pub fn num_samples(&self) -> usize {
        self.truth.len()
    }

    pub fn num_classes(&self) -> u32 {
        self.num_classes
    }

    pub fn model_names(&self) -> &[String] {
        &self.model_names
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn truth(&self) -> &[u32] {
        &self.truth
    }

    pub fn predictions(&self, model: usize) -> &[u32] {
        &self.predictions[model]
    }

    pub fn has_confidences(&self) -> bool {
        self.confidences.is_some()
    }

    pub fn confidence_row(&self, model: usize, sample: usize) -> Option<&[f64]> {
        let c = self.num_classes as usize;
        let n = self.num_samples();
        self.confidences
            .as_ref()
            .map(|conf| &conf[(model * n + sample) * c..(model * n + sample + 1) * c])
    }

    pub fn correctness(&self) -> CorrectnessMatrix {
        CorrectnessMatrix::from_dataset(self)
    }

    /// Fraction of samples each model labels correctly.
    pub fn member_accuracies(&self) -> Vec<f64> {
        self.correctness().accuracies()
    }

    /// Keeps only the listed samples, in the listed order.
    pub fn restrict_samples(&self, samples: &[usize]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySampleSet);
        }
        let pick = |row: &[u32]| samples.iter().map(|&s| row[s]).collect::<Vec<_>>();
        let ds = PredictionDataset::new(
            self.model_names.clone(),
            Some(
                samples
                    .iter()
                    .map(|&s| self.sample_ids[s].clone())
                    .collect(),
            ),
            pick(&self.truth),
            self.predictions.iter().map(|r| pick(r)).collect(),
            Some(self.num_classes),
        )?;
        match &self.confidences {
            None => Ok(ds),
            Some(_) => {
                let mut conf = Vec::with_capacity(
                    self.num_models() * samples.len() * self.num_classes as usize,
                );
                for m in 0..self.num_models() {
                    for &s in samples {
                        conf.extend_from_slice(self.confidence_row(m, s).unwrap());
                    }
                }
                ds.with_confidences(conf)
            }
        }
    }

    /// Reorders models: model `i` of the result is model `order[i]` of `self`.
    pub fn reorder_models(&self, order: &[usize]) -> Result<Self> {
        let ds = PredictionDataset::new(
            order.iter().map(|&m| self.model_names[m].clone()).collect(),
            Some(self.sample_ids.clone()),
            self.truth.clone(),
            order.iter().map(|&m| self.predictions[m].clone()).collect(),
            Some(self.num_classes),
        )?;
        match &self.confidences {
            None => Ok(ds),
            Some(_) => {
                let mut conf = Vec::new();
                for &m in order {
                    for s in 0..self.num_samples() {
                        conf.extend_from_slice(self.confidence_row(m, s).unwrap());
                    }
                }
                ds.with_confidences(conf)
            }
        }
    }
}

/// Checks one confidence row against its predicted label.
pub fn check_confidence_row(row: &[f64], predicted: u32) -> core::result::Result<(), String> {
    if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err("confidence values must be finite and non-negative".into());
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > CONFIDENCE_SUM_TOLERANCE {
        return Err(alloc::format!("confidence row sums to {sum}, expected 1"));
    }
    let peak = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if row[predicted as usize] < peak {
        return Err(alloc::format!(
            "confidence argmax disagrees with predicted label {predicted}"
        ));
    }
    Ok(())
}

/// A set of sample indices packed into 64-bit words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleMask {
    words: Vec<u64>,
    num_samples: usize,
}

impl SampleMask {
    pub fn full(num_samples: usize) -> Self {
        let mut words = vec![u64::MAX; num_samples.div_ceil(64)];
        if !num_samples.is_multiple_of(64) {
            if let Some(last) = words.last_mut() {
                *last = (1u64 << (num_samples % 64)) - 1;
            }
        }
        SampleMask { words, num_samples }
    }

    pub fn from_indices(num_samples: usize, samples: &[usize]) -> Self {
        let mut words = vec![0u64; num_samples.div_ceil(64)];
        for &s in samples {
            assert!(s < num_samples, "sample index {s} out of range");
            words[s / 64] |= 1u64 << (s % 64);
        }
        SampleMask { words, num_samples }
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    /// Number of samples in the set.
    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }
}

/// `bits[m][n]` is true iff model `m` labels sample `n` correctly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrectnessMatrix {
    num_models: usize,
    num_samples: usize,
    words_per_row: usize,
    bits: Vec<u64>,
}

impl CorrectnessMatrix {
    pub fn from_dataset(ds: &PredictionDataset) -> Self {
        let rows: Vec<Vec<bool>> = (0..ds.num_models())
            .map(|m| {
                ds.predictions(m)
                    .iter()
                    .zip(ds.truth())
                    .map(|(p, t)| p == t)
                    .collect()
            })
            .collect();
        Self::from_rows(&rows)
    }

    /// Builds directly from boolean rows (all of equal length).
    pub fn from_rows(rows: &[Vec<bool>]) -> Self {
        let num_models = rows.len();
        let num_samples = rows.first().map_or(0, Vec::len);
        let words_per_row = num_samples.div_ceil(64);
        let mut bits = vec![0u64; num_models * words_per_row];
        for (m, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), num_samples, "ragged correctness rows");
            for (n, &ok) in row.iter().enumerate() {
                if ok {
                    bits[m * words_per_row + n / 64] |= 1u64 << (n % 64);
                }
            }
        }
        CorrectnessMatrix {
            num_models,
            num_samples,
            words_per_row,
            bits,
        }
    }

    pub fn num_models(&self) -> usize {
        self.num_models
    }

    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    pub fn get(&self, model: usize, sample: usize) -> bool {
        self.row(model)[sample / 64] & (1u64 << (sample % 64)) != 0
    }

    pub fn row(&self, model: usize) -> &[u64] {
        &self.bits[model * self.words_per_row..(model + 1) * self.words_per_row]
    }

    pub fn correct_count(&self, model: usize) -> usize {
        self.row(model)
            .iter()
            .map(|w| w.count_ones() as usize)
            .sum()
    }

    pub fn accuracies(&self) -> Vec<f64> {
        (0..self.num_models)
            .map(|m| self.correct_count(m) as f64 / self.num_samples as f64)
            .collect()
    }

    /// Samples in `mask` that model `m` gets right.
    pub fn correct_in(&self, model: usize, mask: &SampleMask) -> usize {
        self.row(model)
            .iter()
            .zip(mask.words())
            .map(|(a, s)| (a & s).count_ones() as usize)
            .sum()
    }

    /// Samples in `mask` that both models get right.
    pub fn both_correct_in(&self, a: usize, b: usize, mask: &SampleMask) -> usize {
        self.row(a)
            .iter()
            .zip(self.row(b))
            .zip(mask.words())
            .map(|((x, y), s)| (x & y & s).count_ones() as usize)
            .sum()
    }
}

/// The samples a focal model misclassifies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegativeSampleSet {
    pub focal: usize,
    /// Ascending sample indices.
    pub samples: Vec<usize>,
}

impl NegativeSampleSet {
    /// The full negative set of `focal`.
    pub fn full(cm: &CorrectnessMatrix, focal: usize) -> Self {
        let samples = (0..cm.num_samples())
            .filter(|&n| !cm.get(focal, n))
            .collect();
        NegativeSampleSet { focal, samples }
    }

    /// Draws `size` samples without replacement (the whole set when it is
    /// not larger than `size`). The result stays sorted.
    pub fn subsample<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Self {
        if self.samples.len() <= size {
            return self.clone();
        }
        let mut picked: Vec<usize> = rand::seq::index::sample(rng, self.samples.len(), size)
            .into_iter()
            .map(|i| self.samples[i])
            .collect();
        picked.sort_unstable();
        NegativeSampleSet {
            focal: self.focal,
            samples: picked,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn mask(&self, num_samples: usize) -> SampleMask {
        SampleMask::from_indices(num_samples, &self.samples)
    }
}

/// Negative sample set of `focal` over the dataset (full set, no sampling).
pub fn negative_sample_set(ds: &PredictionDataset, focal: usize) -> Result<NegativeSampleSet> {
    if focal >= ds.num_models() {
        return Err(Error::InvalidParameter(alloc::format!(
            "focal model {focal} out of range for {} models",
            ds.num_models()
        )));
    }
    Ok(NegativeSampleSet::full(&ds.correctness(), focal))
}

#[cfg(test)]
pub(crate) mod fixture {
    use super::*;

    /// Three models, five samples; m0 is perfect.
    pub fn dataset() -> PredictionDataset {
        PredictionDataset::new(
            vec!["m0".into(), "m1".into(), "m2".into()],
            None,
            vec![0, 1, 0, 1, 2],
            vec![
                vec![0, 1, 0, 1, 2],
                vec![0, 1, 0, 0, 0],
                vec![1, 1, 0, 1, 2],
            ],
            None,
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use rand::SeedableRng;

    #[test]
    fn fixture_shape_and_accuracy() {
        let ds = fixture::dataset();
        assert_eq!(
            (ds.num_models(), ds.num_samples(), ds.num_classes()),
            (3, 5, 3)
        );
        let acc = ds.member_accuracies();
        assert_eq!(acc, [1.0, 0.6, 0.8]);
        let cm = ds.correctness();
        let row1: Vec<bool> = (0..5).map(|n| cm.get(1, n)).collect();
        assert_eq!(row1, [true, true, true, false, false]);
    }

    #[test]
    fn negative_sets() {
        let ds = fixture::dataset();
        assert_eq!(negative_sample_set(&ds, 1).unwrap().samples, [3, 4]);
        assert!(negative_sample_set(&ds, 0).unwrap().is_empty());
        assert_eq!(negative_sample_set(&ds, 2).unwrap().samples, [0]);
        assert!(negative_sample_set(&ds, 3).is_err());

        let wrong = PredictionDataset::new(
            vec!["a".into(), "b".into()],
            None,
            vec![0, 0, 1],
            vec![vec![1, 1, 0], vec![0, 0, 1]],
            None,
        )
        .unwrap();
        assert_eq!(negative_sample_set(&wrong, 0).unwrap().samples, [0, 1, 2]);
        assert_eq!(wrong.member_accuracies(), [0.0, 1.0]);
    }

    #[test]
    fn subsample_is_sorted_subset() {
        let cm = CorrectnessMatrix::from_rows(&[(0..100).map(|i| i % 3 == 0).collect()]);
        let full = NegativeSampleSet::full(&cm, 0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let sub = full.subsample(10, &mut rng);
        assert_eq!(sub.len(), 10);
        assert!(sub.samples.windows(2).all(|w| w[0] < w[1]));
        assert!(sub.samples.iter().all(|s| full.samples.contains(s)));
        assert_eq!(full.subsample(1000, &mut rng), full);
    }

    #[test]
    fn validation_errors() {
        let names = || vec!["a".to_string(), "b".to_string()];
        let err = PredictionDataset::new(
            names(),
            None,
            vec![0, 1],
            vec![vec![0, 7], vec![0, 1]],
            Some(3),
        );
        assert!(matches!(err, Err(Error::LabelOutOfRange { label: 7, .. })));
        let err = PredictionDataset::new(
            vec!["a".into(), "a".into()],
            None,
            vec![0],
            vec![vec![0], vec![0]],
            None,
        );
        assert!(err.is_err());
        let err = PredictionDataset::new(
            names(),
            Some(vec!["x".into(), "x".into()]),
            vec![0, 1],
            vec![vec![0, 1], vec![0, 1]],
            None,
        );
        assert!(err.is_err());
        let ds = PredictionDataset::new(
            names(),
            None,
            vec![0, 1],
            vec![vec![0, 1], vec![1, 1]],
            None,
        )
        .unwrap();
        assert!(ds
            .clone()
            .with_confidences(vec![0.9, 0.1, 0.2, 0.8, 0.6, 0.4, 0.3, 0.7])
            .is_err());
        assert!(ds
            .clone()
            .with_confidences(vec![0.9, 0.1, 0.2, 0.8, 0.4, 0.6, 0.3, 0.7])
            .is_ok());
        assert!(ds
            .with_confidences(vec![0.9, 0.2, 0.2, 0.8, 0.4, 0.6, 0.3, 0.7])
            .is_err());
    }

    #[test]
    fn mask_counts() {
        let m = SampleMask::full(130);
        assert_eq!(m.count(), 130);
        let m = SampleMask::from_indices(130, &[0, 64, 129]);
        assert_eq!(m.count(), 3);
    }
}
