//! Monte-Carlo check of error averaging and a synthetic prediction-log
//! generator.
//!
//! # Error averaging
//!
//! Averaging `S` member errors of variance `v` with exchangeable pairwise
//! correlation `delta` leaves variance `v (1 + (S - 1) delta) / S`.
//! [`simulate_correlated_errors`] draws Gaussian errors with the shared
//! component construction `e_k = sqrt(v) (sqrt(delta) z + sqrt(1 - delta) u_k)`
//! and reports the ratio of the empirical variance of the mean to the
//! empirical member variance (both about the known zero mean), with a
//! delta-method standard error. Trials run in fixed-size shards, shard `i`
//! drawing from stream `i` of a ChaCha8 generator, so the estimate does not
//! depend on how shards are scheduled.
//!
//! # Synthetic logs
//!
//! [`generate_synthetic`] assigns models to cliques. On each sample every
//! clique draws one shared uniform and one shared wrong-label offset; each
//! model follows the shared draw with probability `overlap` and an
//! independent draw otherwise, and is correct when its uniform falls below its
//! target accuracy. Marginal accuracy is therefore exactly the target, and two
//! models of the same clique with accuracies `a`, `b` are both correct with
//! probability `overlap^2 min(a, b) + (1 - overlap^2) a b`, giving correctness
//! correlation `overlap^2 (min(a, b) - a b) / sqrt(a (1 - a) b (1 - b))`.
//! Models in different cliques are independent. A model that follows the
//! shared draw and errs emits the clique's shared wrong label, so
//! near-duplicates also agree on their mistakes.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::PredictionDataset;
use crate::error::{Error, Result};

/// Trials per independently seeded shard.
pub const SHARD_TRIALS: u64 = 8192;

/// Variance ratio of an `s`-member average under correlation `delta`.
pub fn predicted_error_ratio(s: usize, delta: f64) -> Result<f64> {
    if s < 1 {
        return Err(Error::InvalidParameter(
            "team size must be at least 1".into(),
        ));
    }
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidParameter(alloc::format!(
            "delta must lie in [0, 1], got {delta}"
        )));
    }
    Ok((1.0 + (s as f64 - 1.0) * delta) / s as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelatedErrorSpec {
    pub team_size: usize,
    pub delta: f64,
    pub base_variance: f64,
    pub trials: u64,
    pub seed: u64,
}

impl CorrelatedErrorSpec {
    pub fn validate(&self) -> Result<()> {
        predicted_error_ratio(self.team_size, self.delta)?;
        if !(self.base_variance > 0.0 && self.base_variance.is_finite()) {
            return Err(Error::InvalidParameter(
                "base variance must be positive".into(),
            ));
        }
        if self.trials < 2 {
            return Err(Error::InvalidParameter("need at least 2 trials".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationOutcome {
    pub predicted: f64,
    pub empirical: f64,
    pub std_error: f64,
    pub trials: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: u64,
    a: f64,
    b: f64,
    aa: f64,
    bb: f64,
    ab: f64,
}

impl Moments {
    fn push(&mut self, a: f64, b: f64) {
        self.count += 1;
        self.a += a;
        self.b += b;
        self.aa += a * a;
        self.bb += b * b;
        self.ab += a * b;
    }

    fn merge(mut self, o: &Moments) -> Self {
        self.count += o.count;
        self.a += o.a;
        self.b += o.b;
        self.aa += o.aa;
        self.bb += o.bb;
        self.ab += o.ab;
        self
    }
}

fn run_shard(spec: &CorrelatedErrorSpec, shard: u64, trials: u64) -> Moments {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(shard);
    let shared = libm::sqrt(spec.delta);
    let own = libm::sqrt(1.0 - spec.delta);
    let s = spec.team_size as f64;
    let mut moments = Moments::default();
    for _ in 0..trials {
        let z: f64 = rng.sample(StandardNormal);
        let (mut u_sum, mut u_sq) = (0.0, 0.0);
        let mut first = 0.0;
        for k in 0..spec.team_size {
            let u: f64 = rng.sample(StandardNormal);
            if k == 0 {
                first = u;
            }
            u_sum += u;
            u_sq += u * u;
        }
        let (mean_sq, member_sq) = if spec.team_size == 1 {
            let e = shared * z + own * first;
            (spec.base_variance * e * e, spec.base_variance * e * e)
        } else {
            let u_bar = u_sum / s;
            let mean = shared * z + own * u_bar;
            // (1/S) sum_k e_k^2 expanded so that delta = 1 gives exactly z^2
            let member = spec.base_variance
                * (shared * shared * z * z
                    + 2.0 * shared * own * z * u_bar
                    + own * own * (u_sq / s));
            (spec.base_variance * (mean * mean), member)
        };
        moments.push(mean_sq, member_sq);
    }
    moments
}

/// Estimates `Var(mean of S errors) / Var(single error)` by simulation.
pub fn simulate_correlated_errors(spec: &CorrelatedErrorSpec) -> Result<SimulationOutcome> {
    spec.validate()?;
    let shards: Vec<(u64, u64)> = (0..spec.trials.div_ceil(SHARD_TRIALS))
        .map(|i| (i, SHARD_TRIALS.min(spec.trials - i * SHARD_TRIALS)))
        .collect();
    let parts = crate::par_map(&shards, |&(i, n)| run_shard(spec, i, n));
    let total = parts.iter().fold(Moments::default(), |acc, m| acc.merge(m));
    let t = total.count as f64;
    let ratio = total.a / total.b;
    // residual a - ratio * b has zero sample mean by construction
    let resid_ss = (total.aa - 2.0 * ratio * total.ab + ratio * ratio * total.bb).max(0.0);
    let std_error = libm::sqrt(resid_ss / (t - 1.0) / t) / (total.b / t);
    Ok(SimulationOutcome {
        predicted: predicted_error_ratio(spec.team_size, spec.delta)?,
        empirical: ratio,
        std_error,
        trials: total.count,
    })
}

/// Parameters of a synthetic prediction log.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub num_models: usize,
    pub num_samples: usize,
    pub num_classes: u32,
    /// Target accuracy per model, each in `(0, 1]`.
    pub accuracies: Vec<f64>,
    /// Probability a model follows its clique's shared draw.
    pub overlap: f64,
    /// Clique id per model; `None` puts every model in one clique.
    pub cliques: Option<Vec<usize>>,
    /// Also emit a confidence tensor peaked at each predicted label.
    pub confidences: bool,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let m = self.num_models;
        if m < 2 || self.num_samples < 1 || self.num_classes < 2 {
            return Err(Error::Infeasible(alloc::format!(
                "need M >= 2, N >= 1, C >= 2 (got M={m}, N={}, C={})",
                self.num_samples,
                self.num_classes
            )));
        }
        if self.accuracies.len() != m {
            return Err(Error::Infeasible(alloc::format!(
                "{} accuracies for {m} models",
                self.accuracies.len()
            )));
        }
        if let Some(bad) = self.accuracies.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
            return Err(Error::Infeasible(alloc::format!(
                "accuracy {bad} outside the feasible range (0, 1]"
            )));
        }
        if !(0.0..=1.0).contains(&self.overlap) {
            return Err(Error::Infeasible(alloc::format!(
                "overlap {} outside the feasible range [0, 1]",
                self.overlap
            )));
        }
        if let Some(c) = &self.cliques {
            if c.len() != m {
                return Err(Error::Infeasible(alloc::format!(
                    "{} clique ids for {m} models",
                    c.len()
                )));
            }
        }
        Ok(())
    }
}

/// Spreads `m` accuracies evenly over `[lo, hi]`.
pub fn spread_accuracies(m: usize, lo: f64, hi: f64) -> Vec<f64> {
    if m == 1 {
        return vec![lo];
    }
    (0..m)
        .map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64)
        .collect()
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<PredictionDataset> {
    spec.validate()?;
    let m = spec.num_models;
    let n = spec.num_samples;
    let c = spec.num_classes;
    let cliques: Vec<usize> = match &spec.cliques {
        Some(ids) => ids.clone(),
        None => vec![0; m],
    };
    let num_cliques = cliques.iter().max().map_or(1, |x| x + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut truth = Vec::with_capacity(n);
    let mut predictions = vec![Vec::with_capacity(n); m];
    let mut shared_u = vec![0.0f64; num_cliques];
    let mut shared_wrong = vec![0u32; num_cliques];
    for _ in 0..n {
        let label = rng.random_range(0..c);
        truth.push(label);
        for k in 0..num_cliques {
            shared_u[k] = rng.random::<f64>();
            shared_wrong[k] = rng.random_range(1..c);
        }
        for model in 0..m {
            let follow = rng.random::<f64>() < spec.overlap;
            let own_u = rng.random::<f64>();
            let own_wrong = rng.random_range(1..c);
            let k = cliques[model];
            let (u, offset) = if follow {
                (shared_u[k], shared_wrong[k])
            } else {
                (own_u, own_wrong)
            };
            let pred = if u < spec.accuracies[model] {
                label
            } else {
                (label + offset) % c
            };
            predictions[model].push(pred);
        }
    }

    let names: Vec<String> = (0..m).map(|i| alloc::format!("m{i}")).collect();
    let ds = PredictionDataset::new(names, None, truth, predictions, Some(c))?;
    if !spec.confidences {
        return Ok(ds);
    }
    let mut conf = Vec::with_capacity(m * n * c as usize);
    for model in 0..m {
        for s in 0..n {
            let pred = ds.predictions(model)[s] as usize;
            let mut row: Vec<f64> = (0..c as usize).map(|_| rng.random::<f64>()).collect();
            row[pred] += 1.0;
            let total: f64 = row.iter().sum();
            conf.extend(row.into_iter().map(|x| x / total));
        }
    }
    ds.with_confidences(conf)
}
