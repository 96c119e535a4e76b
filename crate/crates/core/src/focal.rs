//! Focal diversity scores.
//!
//! For a team `T` of size `S` and each member `f` acting as focal model, the
//! baseline measure is evaluated only on the samples `f` misclassifies. Those
//! raw focal scores are min-max scaled within the group of same-size
//! candidates that contain `f`, and the team's focal diversity `FQ(T)` is the
//! average of its members' scaled scores weighted by the members' accuracy
//! ranks inside the team.
//!
//! Members that never err have no negative samples and drop out of the
//! average; the remaining rank weights are renormalized.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{CorrectnessMatrix, NegativeSampleSet, PredictionDataset};
use crate::diversity::{score_on_subset, Degeneracy, Metric, Score, SubsetStats};
use crate::error::{Error, Result};
use crate::team::{Team, TeamsOfSize};

/// Scaled value assigned to every member of a group whose raw scores are all
/// equal, and the FQ of a team with no erring member.
pub const NEUTRAL_SCORE: f64 = 0.5;

/// Groups whose raw range is at most this wide count as flat. Equal scores
/// reached through different summation orders can differ in the last bits,
/// and min-max scaling would blow that noise up to the full `[0, 1]` range.
pub const FLAT_TOLERANCE: f64 = 1e-12;

/// How negative samples are drawn for each focal model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NegativeSampling {
    /// Every misclassified sample.
    #[default]
    Full,
    /// At most `size` misclassified samples drawn without replacement;
    /// focal model `f` uses stream `f` of a ChaCha8 generator seeded by `seed`.
    Subsample { size: usize, seed: u64 },
}

/// Population over which a focal group's min and max are taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScalingScope {
    /// Only the candidates actually being scored.
    #[default]
    Survivors,
    /// Every team of that size containing the focal model, scored or not.
    FullSet,
}

/// Precomputed per-focal state shared by every focal metric.
#[derive(Debug, Clone)]
pub struct FocalContext {
    cm: CorrectnessMatrix,
    accuracies: Vec<f64>,
    negatives: Vec<NegativeSampleSet>,
    stats: Vec<Option<SubsetStats>>,
}

impl FocalContext {
    pub fn new(ds: &PredictionDataset, sampling: NegativeSampling) -> Self {
        let cm = ds.correctness();
        let negatives = (0..cm.num_models())
            .map(|f| {
                let full = NegativeSampleSet::full(&cm, f);
                match sampling {
                    NegativeSampling::Full => full,
                    NegativeSampling::Subsample { size, seed } => {
                        let mut rng = ChaCha8Rng::seed_from_u64(seed);
                        rng.set_stream(f as u64);
                        full.subsample(size, &mut rng)
                    }
                }
            })
            .collect();
        Self::from_parts(cm, negatives)
    }

    /// Builds from a correctness matrix and one negative set per model.
    pub fn from_parts(cm: CorrectnessMatrix, negatives: Vec<NegativeSampleSet>) -> Self {
        assert_eq!(negatives.len(), cm.num_models());
        let stats = negatives
            .iter()
            .map(|neg| {
                (!neg.is_empty()).then(|| SubsetStats::new(&cm, &neg.mask(cm.num_samples())))
            })
            .collect();
        FocalContext {
            accuracies: cm.accuracies(),
            cm,
            negatives,
            stats,
        }
    }

    pub fn num_models(&self) -> usize {
        self.cm.num_models()
    }

    pub fn correctness(&self) -> &CorrectnessMatrix {
        &self.cm
    }

    pub fn accuracies(&self) -> &[f64] {
        &self.accuracies
    }

    pub fn negative_set(&self, focal: usize) -> &NegativeSampleSet {
        &self.negatives[focal]
    }

    /// Raw focal negative correlation of `team` with `focal` as focal model.
    pub fn raw_score(&self, metric: Metric, team: Team, focal: usize) -> Result<Score> {
        if !team.contains(focal) {
            return Err(Error::InvalidTeam(alloc::format!(
                "focal model {focal} is not a member of {team}"
            )));
        }
        let stats = self.stats[focal]
            .as_ref()
            .ok_or(Error::PerfectFocalModel(focal))?;
        let score = stats.score(metric, team)?;
        debug_assert!(
            metric != Metric::GeneralizedDiversity
                || !score.flags.contains(Degeneracy::NO_FAILURES),
            "focal model fails every negative sample"
        );
        Ok(score)
    }
}

/// Baseline measure of `team` evaluated on `focal`'s negative samples.
pub fn focal_negative_correlation(
    metric: Metric,
    cm: &CorrectnessMatrix,
    team: Team,
    focal: usize,
    neg: &NegativeSampleSet,
) -> Result<Score> {
    if !team.contains(focal) || neg.focal != focal {
        return Err(Error::InvalidTeam(alloc::format!(
            "focal model {focal} must be a member of {team} and own the negative set"
        )));
    }
    if neg.is_empty() {
        return Err(Error::PerfectFocalModel(focal));
    }
    let score = score_on_subset(metric, cm, team, &neg.samples)?;
    debug_assert!(!score.flags.contains(Degeneracy::NO_FAILURES));
    Ok(score)
}

/// Raw and scaled focal scores of one `(metric, size, focal)` group.
#[derive(Debug, Clone, PartialEq)]
pub struct FocalGroup {
    pub metric: Metric,
    pub size: usize,
    pub focal: usize,
    pub raw: Vec<(Team, f64)>,
    /// Parallel to `raw`; empty until scaled.
    pub scaled: Vec<f64>,
    /// Set when max - min is within [`FLAT_TOLERANCE`] and every scaled value
    /// is [`NEUTRAL_SCORE`].
    pub flat: bool,
}

impl FocalGroup {
    pub fn new(metric: Metric, size: usize, focal: usize, raw: Vec<(Team, f64)>) -> Self {
        FocalGroup {
            metric,
            size,
            focal,
            raw,
            scaled: Vec::new(),
            flat: false,
        }
    }

    fn bounds(&self) -> (f64, f64) {
        self.raw
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, v)| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Scales with explicit bounds, clamping into `[0, 1]`.
    fn scale_within(mut self, lo: f64, hi: f64) -> Self {
        if hi - lo > FLAT_TOLERANCE {
            self.scaled = self
                .raw
                .iter()
                .map(|&(_, v)| ((v - lo) / (hi - lo)).clamp(0.0, 1.0))
                .collect();
            self.flat = false;
        } else {
            self.scaled = vec![NEUTRAL_SCORE; self.raw.len()];
            self.flat = true;
        }
        self
    }
}

/// Min-max scales a group over its own raw values.
pub fn scale_group(group: FocalGroup) -> FocalGroup {
    let (lo, hi) = group.bounds();
    group.scale_within(lo, hi)
}

/// Accuracy-rank weights of `team`'s members (ascending member order).
///
/// The least accurate member has rank 1 and the most accurate rank `S`; tied
/// members share the mean of their ranks. Weights are ranks over their sum.
pub fn accuracy_rank_weights(team: Team, accuracies: &[f64]) -> Vec<f64> {
    let members = team.to_vec();
    let s = members.len();
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&i, &j| accuracies[members[i]].total_cmp(&accuracies[members[j]]));
    let mut ranks = vec![0.0; s];
    let mut start = 0;
    while start < s {
        let acc = accuracies[members[order[start]]];
        let mut end = start + 1;
        while end < s && accuracies[members[order[end]]] == acc {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let mean_rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = mean_rank;
        }
        start = end;
    }
    let total = (s * (s + 1)) as f64 / 2.0;
    ranks.into_iter().map(|r| r / total).collect()
}

/// One focal member's share of a team's FQ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalContribution {
    pub focal: usize,
    pub raw: f64,
    pub scaled: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FocalEntry {
    pub team: Team,
    pub fq: f64,
    pub flags: Degeneracy,
    pub contributions: Vec<FocalContribution>,
}

impl FocalEntry {
    /// Weighted mean of the unscaled focal scores. Scaling maps every group
    /// minimum to 0, so this separates teams whose FQ ties there.
    pub fn raw_fq(&self) -> f64 {
        self.contributions.iter().map(|c| c.weight * c.raw).sum()
    }
}

/// FQ of every scored team for one focal metric, ordered by size then
/// lexicographically.
#[derive(Debug, Clone, PartialEq)]
pub struct FocalScoreTable {
    pub metric: Metric,
    pub entries: Vec<FocalEntry>,
}

fn size_lex(t: &Team) -> (usize, Team) {
    (t.len(), *t)
}

impl FocalScoreTable {
    pub fn get(&self, team: Team) -> Option<&FocalEntry> {
        self.entries
            .binary_search_by_key(&size_lex(&team), |e| size_lex(&e.team))
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scores(&self) -> Vec<(Team, f64)> {
        self.entries.iter().map(|e| (e.team, e.fq)).collect()
    }
}

/// Computes FQ for every candidate team (candidates may mix sizes).
pub fn compute_focal_table(
    metric: Metric,
    ctx: &FocalContext,
    candidates: &[Team],
    scope: ScalingScope,
) -> Result<FocalScoreTable> {
    let m = ctx.num_models();
    let mut by_size: BTreeMap<usize, Vec<Team>> = BTreeMap::new();
    for &t in candidates {
        t.validate(m, 2)?;
        by_size.entry(t.len()).or_default().push(t);
    }
    let mut entries = Vec::with_capacity(candidates.len());
    for (size, mut teams) in by_size {
        teams.sort_unstable();
        teams.dedup();
        entries.extend(score_level(metric, ctx, size, &teams, scope)?);
    }
    Ok(FocalScoreTable { metric, entries })
}

/// Scores one size level. `teams` must be sorted, distinct and all of `size`.
pub(crate) fn score_level(
    metric: Metric,
    ctx: &FocalContext,
    size: usize,
    teams: &[Team],
    scope: ScalingScope,
) -> Result<Vec<FocalEntry>> {
    let m = ctx.num_models();
    let mut slots: Vec<Vec<Option<Slot>>> = teams.iter().map(|t| vec![None; t.len()]).collect();

    for focal in 0..m {
        if ctx.negative_set(focal).is_empty() {
            continue;
        }
        let idx: Vec<usize> = (0..teams.len())
            .filter(|&i| teams[i].contains(focal))
            .collect();
        if idx.is_empty() {
            continue;
        }
        let raw_scores: Vec<Score> =
            crate::par_map(&idx, |&i| ctx.raw_score(metric, teams[i], focal))
                .into_iter()
                .collect::<Result<_>>()?;
        let group = FocalGroup::new(
            metric,
            size,
            focal,
            idx.iter()
                .zip(&raw_scores)
                .map(|(&i, s)| (teams[i], s.value))
                .collect(),
        );
        let group = match scope {
            ScalingScope::Survivors => scale_group(group),
            ScalingScope::FullSet => {
                let everyone: Vec<Team> = TeamsOfSize::new(m, size)
                    .filter(|t| t.contains(focal))
                    .collect();
                let reference: Vec<f64> = crate::par_map(&everyone, |&t| {
                    ctx.raw_score(metric, t, focal).map(|s| s.value)
                })
                .into_iter()
                .collect::<Result<_>>()?;
                let (lo, hi) = reference
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                        (lo.min(v), hi.max(v))
                    });
                group.scale_within(lo, hi)
            }
        };
        for (k, &i) in idx.iter().enumerate() {
            let slot = teams[i].members().position(|x| x == focal).unwrap();
            slots[i][slot] = Some((
                group.raw[k].1,
                group.scaled[k],
                raw_scores[k].flags,
                group.flat,
            ));
        }
    }

    Ok(teams
        .iter()
        .zip(slots)
        .map(|(&team, slots)| aggregate(team, &slots, ctx.accuracies()))
        .collect())
}

/// One member's focal result: (raw, scaled, raw flags, group flat).
type Slot = (f64, f64, Degeneracy, bool);

fn aggregate(team: Team, slots: &[Option<Slot>], accuracies: &[f64]) -> FocalEntry {
    let weights = accuracy_rank_weights(team, accuracies);
    let mut flags = Degeneracy::empty();
    let kept: f64 = slots
        .iter()
        .zip(&weights)
        .filter(|(s, _)| s.is_some())
        .map(|(_, w)| *w)
        .sum();
    if kept == 0.0 {
        return FocalEntry {
            team,
            fq: NEUTRAL_SCORE,
            flags: Degeneracy::NO_FOCAL,
            contributions: Vec::new(),
        };
    }
    let mut fq = 0.0;
    let mut contributions = Vec::with_capacity(slots.len());
    for ((focal, slot), w) in team.members().zip(slots).zip(&weights) {
        if let Some((raw, scaled, raw_flags, flat)) = *slot {
            let weight = w / kept;
            fq += weight * scaled;
            flags |= raw_flags;
            if flat {
                flags |= Degeneracy::FLAT_GROUP;
            }
            contributions.push(FocalContribution {
                focal,
                raw,
                scaled,
                weight,
            });
        }
    }
    FocalEntry {
        team,
        fq: fq.clamp(0.0, 1.0),
        flags,
        contributions,
    }
}
