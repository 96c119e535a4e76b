//! Focal-diversity ensemble pruning over recorded model predictions.
//!
//! The crate works purely on prediction logs: a ground-truth label vector and
//! one predicted-label row per member model. From those it derives the
//! correctness matrix, the classic ensemble diversity measures (Cohen's kappa,
//! binary disagreement, Kohavi-Wolpert variance, generalized diversity), their
//! focal variants evaluated on each member's misclassified samples, and the
//! pruning engines built on top of them:
//!
//! * mean-threshold selection over every candidate team,
//! * hierarchical pruning that discards the least diverse fraction at each team
//!   size and skips every superset of a discarded team,
//! * quorum consensus across several focal metrics.
//!
//! Brute-force evaluation (plurality / soft voting over every team) and a
//! Monte-Carlo check of the error-averaging formula live in [`evaluation`] and
//! [`simulation`].
//!
//! The crate is `no_std` and only needs `alloc`. The `parallel` feature pulls
//! in `std` and rayon for scoring teams concurrently; results are identical
//! with or without it.

#![no_std]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod data;
pub mod diversity;
mod error;
pub mod evaluation;
pub mod focal;
pub mod pruning;
pub mod simulation;
pub mod team;

pub use data::{CorrectnessMatrix, NegativeSampleSet, PredictionDataset, SampleMask};
pub use diversity::{Degeneracy, Metric, PairwiseCounts, Score};
pub use error::{Error, Result};
pub use evaluation::{OracleTable, PruneQuality, QualityScope, Voting};
pub use focal::{FocalContext, FocalScoreTable, ScalingScope};
pub use pruning::{HqConfig, PruneSet, SelectionResult};
pub use team::Team;

/// Order-preserving map, parallel when the `parallel` feature is on.
#[cfg(feature = "parallel")]
pub(crate) fn par_map<T: Sync, R: Send>(
    items: &[T],
    f: impl Fn(&T) -> R + Sync + Send,
) -> alloc::vec::Vec<R> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_map<T, R>(items: &[T], f: impl Fn(&T) -> R) -> alloc::vec::Vec<R> {
    items.iter().map(f).collect()
}
