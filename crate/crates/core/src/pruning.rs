//! Pruning engines: mean-threshold selection, hierarchical pruning and quorum
//! consensus across metrics.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::diversity::Metric;
use crate::error::{Error, Result};
use crate::focal::{score_level, FocalContext, ScalingScope};
use crate::team::{binomial, check_guard, Team, TeamsOfSize, ENUMERATION_LIMIT};

/// Default fraction of candidates removed per level.
pub const DEFAULT_BETA: f64 = 0.10;

/// Default consensus quorum.
pub const DEFAULT_QUORUM: usize = 3;

/// Teams already pruned. Kept as a minimal antichain: no entry contains
/// another.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PruneSet {
    entries: Vec<Team>,
}

impl PruneSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `team` unless an existing entry is already a subset of it.
    /// Entries that are supersets of `team` are dropped. Returns whether the
    /// set changed.
    pub fn insert(&mut self, team: Team) -> bool {
        if self.covers(team) {
            return false;
        }
        self.entries.retain(|e| !team.is_subset_of(*e));
        self.entries.push(team);
        true
    }

    /// True iff some entry is a subset of `team`.
    pub fn covers(&self, team: Team) -> bool {
        let mask = team.mask();
        self.entries.iter().any(|e| e.mask() & mask == e.mask())
    }

    pub fn entries(&self) -> &[Team] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// True iff `team` contains some pruned team.
pub fn contains_pruned_subset(team: Team, prune_set: &PruneSet) -> bool {
    prune_set.covers(team)
}

/// Teams scoring strictly above the mean score.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSelection {
    pub threshold: f64,
    pub selected: Vec<Team>,
}

pub fn mean_threshold_prune(scores: &[(Team, f64)]) -> Result<ThresholdSelection> {
    if scores.is_empty() {
        return Err(Error::InvalidParameter("empty score table".into()));
    }
    let threshold = scores.iter().map(|(_, s)| s).sum::<f64>() / scores.len() as f64;
    let mut selected: Vec<Team> = scores
        .iter()
        .filter(|(_, s)| *s > threshold)
        .map(|(t, _)| *t)
        .collect();
    selected.sort_unstable();
    Ok(ThresholdSelection {
        threshold,
        selected,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HqConfig {
    pub target_size: usize,
    pub beta: f64,
    pub scaling: ScalingScope,
    /// Lifts the combinatorial guard on the ensemble size.
    pub allow_large: bool,
}

impl HqConfig {
    /// Defaults for an `m`-model ensemble: half the ensemble (at least 2),
    /// 10% pruned per level.
    pub fn for_models(m: usize) -> Self {
        HqConfig {
            target_size: (m / 2).max(2),
            beta: DEFAULT_BETA,
            scaling: ScalingScope::Survivors,
            allow_large: false,
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidParameter(alloc::format!(
                "beta must lie in (0, 1), got {}",
                self.beta
            )));
        }
        if self.target_size < 2 || self.target_size + 1 > m {
            return Err(Error::InvalidParameter(alloc::format!(
                "target size must lie in [2, {}], got {}",
                m.saturating_sub(1),
                self.target_size
            )));
        }
        check_guard(m, ENUMERATION_LIMIT, self.allow_large)
    }

    /// Number of teams removed from a level of `survivors` candidates.
    pub fn prune_count(&self, survivors: usize) -> usize {
        // the epsilon absorbs products like 0.29 * 100 = 28.999999999999996
        libm::floor(self.beta * survivors as f64 + 1e-9) as usize
    }
}

/// Prune-order key for a score. Values closer than 1e-12 compare equal, so
/// rounding noise between mathematically equal scores never decides a tie.
pub fn tie_grid(score: f64) -> i64 {
    libm::round(score * 1e12) as i64
}

/// Accounting for one team size.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelReport {
    pub size: usize,
    /// `C(M, size)`.
    pub total: u64,
    /// Candidates skipped because they contain a pruned team.
    pub skipped: u64,
    /// Scored candidates with their FQ, ascending by FQ, then unscaled focal
    /// score (both on the [`tie_grid`]), then team.
    pub scored: Vec<(Team, f64)>,
    /// The lowest-scoring candidates removed at this level.
    pub pruned: Vec<Team>,
}

impl LevelReport {
    pub fn scored_count(&self) -> usize {
        self.scored.len()
    }
}

/// Output of hierarchical pruning for one metric.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub metric: Metric,
    pub target_size: usize,
    pub beta: f64,
    pub scaling: ScalingScope,
    /// Surviving teams of the target size with their FQ, lexicographic.
    pub selected: Vec<(Team, f64)>,
    pub levels: Vec<LevelReport>,
    pub prune_set: PruneSet,
}

impl SelectionResult {
    pub fn selected_teams(&self) -> Vec<Team> {
        self.selected.iter().map(|(t, _)| *t).collect()
    }

    pub fn level(&self, size: usize) -> Option<&LevelReport> {
        self.levels.iter().find(|l| l.size == size)
    }
}

/// Level-at-a-time hierarchical pruning. Each [`step`](Self::step) handles
/// one team size so callers can time or inspect levels individually.
pub struct HierarchicalPruner<'a> {
    metric: Metric,
    ctx: &'a FocalContext,
    config: HqConfig,
    prune_set: PruneSet,
    levels: Vec<LevelReport>,
    selected: Vec<(Team, f64)>,
    next_size: usize,
}

impl<'a> HierarchicalPruner<'a> {
    pub fn new(metric: Metric, ctx: &'a FocalContext, config: HqConfig) -> Result<Self> {
        config.validate(ctx.num_models())?;
        Ok(HierarchicalPruner {
            metric,
            ctx,
            config,
            prune_set: PruneSet::new(),
            levels: Vec::new(),
            selected: Vec::new(),
            next_size: 2,
        })
    }

    pub fn prune_set(&self) -> &PruneSet {
        &self.prune_set
    }

    pub fn is_done(&self) -> bool {
        self.next_size > self.config.target_size
    }

    /// Processes the next size level; `None` once the target size is done.
    pub fn step(&mut self) -> Result<Option<&LevelReport>> {
        if self.is_done() {
            return Ok(None);
        }
        let size = self.next_size;
        let m = self.ctx.num_models();
        let mut skipped = 0u64;
        let candidates: Vec<Team> = TeamsOfSize::new(m, size)
            .filter(|&t| {
                let skip = self.prune_set.covers(t);
                skipped += skip as u64;
                !skip
            })
            .collect();
        let entries = score_level(
            self.metric,
            self.ctx,
            size,
            &candidates,
            self.config.scaling,
        )?;
        let mut keyed: Vec<((i64, i64, Team), f64)> = entries
            .iter()
            .map(|e| ((tie_grid(e.fq), tie_grid(e.raw_fq()), e.team), e.fq))
            .collect();
        keyed.sort_unstable_by_key(|k| k.0);
        let scored: Vec<(Team, f64)> = keyed.into_iter().map(|((.., t), fq)| (t, fq)).collect();

        let n = self.config.prune_count(scored.len());
        let pruned: Vec<Team> = scored[..n].iter().map(|(t, _)| *t).collect();
        let last = size == self.config.target_size;
        if last {
            let mut keep = scored[n..].to_vec();
            keep.sort_by_key(|k| k.0);
            self.selected = keep;
        } else {
            for &t in &pruned {
                self.prune_set.insert(t);
            }
        }
        self.levels.push(LevelReport {
            size,
            total: binomial(m, size),
            skipped,
            scored,
            pruned,
        });
        self.next_size += 1;
        Ok(self.levels.last())
    }

    pub fn finish(mut self) -> Result<SelectionResult> {
        while self.step()?.is_some() {}
        Ok(SelectionResult {
            metric: self.metric,
            target_size: self.config.target_size,
            beta: self.config.beta,
            scaling: self.config.scaling,
            selected: self.selected,
            levels: self.levels,
            prune_set: self.prune_set,
        })
    }
}

/// Hierarchical pruning with focal metric `metric` down to
/// `config.target_size`.
pub fn hq_prune(metric: Metric, ctx: &FocalContext, config: HqConfig) -> Result<SelectionResult> {
    HierarchicalPruner::new(metric, ctx, config)?.finish()
}

/// Teams present in at least `quorum` of `selections`.
pub fn consensus_vote(selections: &[&SelectionResult], quorum: usize) -> Result<Vec<Team>> {
    if let Some(first) = selections.first() {
        if let Some(other) = selections
            .iter()
            .find(|s| s.target_size != first.target_size)
        {
            return Err(Error::InvalidParameter(alloc::format!(
                "selections disagree on target size ({} vs {})",
                first.target_size,
                other.target_size
            )));
        }
    }
    let sets: Vec<Vec<Team>> = selections.iter().map(|s| s.selected_teams()).collect();
    let refs: Vec<&[Team]> = sets.iter().map(Vec::as_slice).collect();
    consensus_of(&refs, quorum)
}

/// Quorum vote over plain team lists.
pub fn consensus_of(sets: &[&[Team]], quorum: usize) -> Result<Vec<Team>> {
    if quorum == 0 || sets.len() < quorum {
        return Err(Error::InvalidParameter(alloc::format!(
            "quorum {quorum} needs at least that many selections, got {}",
            sets.len()
        )));
    }
    let mut votes: BTreeMap<Team, usize> = BTreeMap::new();
    for set in sets {
        let mut distinct = set.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        for t in distinct {
            *votes.entry(t).or_default() += 1;
        }
    }
    Ok(votes
        .into_iter()
        .filter(|&(_, v)| v >= quorum)
        .map(|(t, _)| t)
        .collect())
}
