//! Ensemble voting, the brute-force accuracy oracle, and pruning quality.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::data::PredictionDataset;
use crate::error::{Error, Result};
use crate::team::{check_guard, SizeRange, Team};

/// Largest ensemble the oracle enumerates without an override.
pub const ORACLE_LIMIT: usize = 20;

/// How member predictions combine into the ensemble prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Voting {
    /// Most votes wins. Ties go to the tied class whose voters have the
    /// highest summed accuracy, then to the lowest class index.
    #[default]
    Plurality,
    /// Argmax of the mean confidence vector; ties go to the lowest class.
    SoftAverage,
}

impl Voting {
    pub fn name(self) -> &'static str {
        match self {
            Voting::Plurality => "plurality",
            Voting::SoftAverage => "soft_average",
        }
    }
}

impl fmt::Display for Voting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Voting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plurality" => Ok(Voting::Plurality),
            "soft_average" | "soft" | "average" => Ok(Voting::SoftAverage),
            other => Err(Error::InvalidParameter(alloc::format!(
                "unknown voting method {other:?} (expected plurality or soft_average)"
            ))),
        }
    }
}

/// Reusable voting state over one dataset.
pub struct Voter<'a> {
    ds: &'a PredictionDataset,
    voting: Voting,
    // correct-sample counts; the tie-break weight (proportional to accuracy)
    correct: Vec<u64>,
}

impl<'a> Voter<'a> {
    pub fn new(ds: &'a PredictionDataset, voting: Voting) -> Result<Self> {
        if voting == Voting::SoftAverage && !ds.has_confidences() {
            return Err(Error::MissingConfidences);
        }
        let cm = ds.correctness();
        Ok(Voter {
            ds,
            voting,
            correct: (0..ds.num_models())
                .map(|m| cm.correct_count(m) as u64)
                .collect(),
        })
    }

    fn predict_with(
        &self,
        team: Team,
        sample: usize,
        votes: &mut [u64],
        weight: &mut [u64],
        mass: &mut [f64],
    ) -> u32 {
        let c = self.ds.num_classes() as usize;
        match self.voting {
            Voting::Plurality => {
                votes[..c].fill(0);
                weight[..c].fill(0);
                for m in team.members() {
                    let label = self.ds.predictions(m)[sample] as usize;
                    votes[label] += 1;
                    weight[label] += self.correct[m];
                }
                let mut best = 0;
                for k in 1..c {
                    if (votes[k], weight[k]) > (votes[best], weight[best]) {
                        best = k;
                    }
                }
                best as u32
            }
            Voting::SoftAverage => {
                mass[..c].fill(0.0);
                for m in team.members() {
                    let row = self
                        .ds
                        .confidence_row(m, sample)
                        .expect("checked in Voter::new");
                    for (acc, p) in mass.iter_mut().zip(row) {
                        *acc += p;
                    }
                }
                let mut best = 0;
                for k in 1..c {
                    if mass[k] > mass[best] {
                        best = k;
                    }
                }
                best as u32
            }
        }
    }

    pub fn predict(&self, team: Team, sample: usize) -> u32 {
        let c = self.ds.num_classes() as usize;
        self.predict_with(
            team,
            sample,
            &mut vec![0; c],
            &mut vec![0; c],
            &mut vec![0.0; c],
        )
    }

    /// Number of samples the team labels correctly.
    pub fn correct_count(&self, team: Team) -> u64 {
        let c = self.ds.num_classes() as usize;
        let (mut votes, mut weight, mut mass) = (vec![0; c], vec![0; c], vec![0.0; c]);
        let truth = self.ds.truth();
        (0..self.ds.num_samples())
            .filter(|&n| self.predict_with(team, n, &mut votes, &mut weight, &mut mass) == truth[n])
            .count() as u64
    }
}

fn check_team(ds: &PredictionDataset, team: Team) -> Result<()> {
    team.validate(ds.num_models(), 1)
}

/// Ensemble label for one sample.
pub fn ensemble_predict(
    ds: &PredictionDataset,
    team: Team,
    sample: usize,
    voting: Voting,
) -> Result<u32> {
    check_team(ds, team)?;
    if sample >= ds.num_samples() {
        return Err(Error::InvalidParameter(alloc::format!(
            "sample {sample} out of range"
        )));
    }
    Ok(Voter::new(ds, voting)?.predict(team, sample))
}

/// Fraction of samples the ensemble labels correctly.
pub fn ensemble_accuracy(ds: &PredictionDataset, team: Team, voting: Voting) -> Result<f64> {
    check_team(ds, team)?;
    Ok(Voter::new(ds, voting)?.correct_count(team) as f64 / ds.num_samples() as f64)
}

/// Ensemble accuracy of every candidate team, and which ones match or beat
/// the full ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleTable {
    pub voting: Voting,
    pub num_models: usize,
    pub num_samples: usize,
    /// Correct-sample count of the full ensemble.
    pub reference_correct: u64,
    /// Sorted by team.
    entries: Vec<(Team, u64)>,
}

impl OracleTable {
    pub fn reference_accuracy(&self) -> f64 {
        self.reference_correct as f64 / self.num_samples as f64
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn correct(&self, team: Team) -> Option<u64> {
        self.entries
            .binary_search_by(|(t, _)| t.cmp(&team))
            .ok()
            .map(|i| self.entries[i].1)
    }

    pub fn accuracy(&self, team: Team) -> Option<f64> {
        self.correct(team)
            .map(|c| c as f64 / self.num_samples as f64)
    }

    /// Accuracy at or above the full ensemble's.
    pub fn is_good(&self, team: Team) -> Option<bool> {
        self.correct(team).map(|c| c >= self.reference_correct)
    }

    pub fn entries(&self) -> impl Iterator<Item = (Team, f64)> + '_ {
        self.entries
            .iter()
            .map(|&(t, c)| (t, c as f64 / self.num_samples as f64))
    }

    pub fn good(&self) -> impl Iterator<Item = Team> + '_ {
        self.entries
            .iter()
            .filter(|(_, c)| *c >= self.reference_correct)
            .map(|(t, _)| *t)
    }
}

/// Evaluates every team in `range` plus the full ensemble.
pub fn brute_force_oracle(
    ds: &PredictionDataset,
    voting: Voting,
    range: SizeRange,
    allow_large: bool,
) -> Result<OracleTable> {
    let m = ds.num_models();
    check_guard(m, ORACLE_LIMIT, allow_large)?;
    let teams: Vec<Team> = crate::team::enumerate_teams(m, range, true)?.collect();
    let voter = Voter::new(ds, voting)?;
    let counts = crate::par_map(&teams, |&t| voter.correct_count(t));
    let mut entries: Vec<(Team, u64)> = teams.into_iter().zip(counts).collect();
    entries.sort_unstable_by_key(|e| e.0);
    Ok(OracleTable {
        voting,
        num_models: m,
        num_samples: ds.num_samples(),
        reference_correct: voter.correct_count(Team::full(m)),
        entries,
    })
}

/// Relative execution-cost saving of an `s`-member team out of `m`.
pub fn cost_reduction(m: usize, s: usize) -> f64 {
    (m - s) as f64 / m as f64
}

/// Which good teams count toward recall.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QualityScope {
    /// Only good teams of this size.
    Size(usize),
    /// Good teams of every size in the oracle.
    AllSizes,
}

impl QualityScope {
    pub fn includes(self, team: Team) -> bool {
        match self {
            QualityScope::Size(s) => team.len() == s,
            QualityScope::AllSizes => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneQuality {
    pub selected: usize,
    /// Selected teams that are good.
    pub hits: usize,
    /// Good teams in scope.
    pub good_in_scope: usize,
    /// `hits / selected`, 0 when nothing was selected.
    pub precision: f64,
    /// Selected good in-scope teams over good in-scope teams, 0 when there
    /// are none.
    pub recall: f64,
    pub accuracy_range: Option<(f64, f64)>,
    pub cost_reduction_range: Option<(f64, f64)>,
    pub empty_selection: bool,
    pub empty_good: bool,
}

fn range_of(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values.fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

pub fn prune_quality(
    selected: &[Team],
    oracle: &OracleTable,
    scope: QualityScope,
) -> Result<PruneQuality> {
    if !oracle.entries.iter().any(|(t, _)| scope.includes(*t)) {
        return Err(Error::InvalidParameter(alloc::format!(
            "oracle has no teams in scope {scope:?}"
        )));
    }
    let mut distinct = selected.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let mut hits = 0;
    let mut scoped_hits = 0;
    let mut accuracies = Vec::with_capacity(distinct.len());
    for &t in &distinct {
        let correct = oracle
            .correct(t)
            .ok_or_else(|| Error::NotInOracle(t.render()))?;
        accuracies.push(correct as f64 / oracle.num_samples as f64);
        if correct >= oracle.reference_correct {
            hits += 1;
            if scope.includes(t) {
                scoped_hits += 1;
            }
        }
    }
    let good_in_scope = oracle.good().filter(|t| scope.includes(*t)).count();
    let m = oracle.num_models;
    Ok(PruneQuality {
        selected: distinct.len(),
        hits,
        good_in_scope,
        precision: if distinct.is_empty() {
            0.0
        } else {
            hits as f64 / distinct.len() as f64
        },
        recall: if good_in_scope == 0 {
            0.0
        } else {
            scoped_hits as f64 / good_in_scope as f64
        },
        accuracy_range: range_of(accuracies.into_iter()),
        cost_reduction_range: range_of(distinct.iter().map(|t| cost_reduction(m, t.len()))),
        empty_selection: distinct.is_empty(),
        empty_good: good_in_scope == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::fixture;
    use alloc::string::ToString;

    fn team(m: &[usize]) -> Team {
        Team::new(m).unwrap()
    }

    #[test]
    fn fixture_plurality() {
        let ds = fixture::dataset();
        let t = team(&[0, 1, 2]);
        assert_eq!(ensemble_predict(&ds, t, 3, Voting::Plurality).unwrap(), 1);
        assert_eq!(ensemble_accuracy(&ds, t, Voting::Plurality).unwrap(), 1.0);
        assert!(matches!(
            ensemble_accuracy(&ds, t, Voting::SoftAverage),
            Err(Error::MissingConfidences)
        ));
    }

    #[test]
    fn split_vote_goes_to_more_accurate() {
        // a: 9/10 right, b: 6/10 right; on sample 0 they disagree
        let truth = vec![0, 1, 1, 1, 1, 1, 1, 1, 1, 1];
        let a = vec![1, 1, 1, 1, 1, 1, 1, 1, 1, 1];
        let b = vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let ds = PredictionDataset::new(
            vec!["a".to_string(), "b".to_string()],
            None,
            truth,
            vec![a, b],
            None,
        )
        .unwrap();
        assert_eq!(ds.member_accuracies(), [0.9, 0.6]);
        assert_eq!(
            ensemble_predict(&ds, team(&[0, 1]), 0, Voting::Plurality).unwrap(),
            1
        );
    }

    #[test]
    fn soft_average() {
        let ds = PredictionDataset::new(
            vec!["a".to_string(), "b".to_string()],
            None,
            vec![0, 1],
            vec![vec![0, 0], vec![1, 1]],
            None,
        )
        .unwrap()
        .with_confidences(vec![0.6, 0.4, 0.9, 0.1, 0.2, 0.8, 0.45, 0.55])
        .unwrap();
        let t = team(&[0, 1]);
        assert_eq!(ensemble_predict(&ds, t, 0, Voting::SoftAverage).unwrap(), 1);
        assert_eq!(ensemble_predict(&ds, t, 1, Voting::SoftAverage).unwrap(), 0);
        assert_eq!(ensemble_accuracy(&ds, t, Voting::SoftAverage).unwrap(), 0.0);
    }

    #[test]
    fn oracle_counts_and_good_set() {
        let ds = fixture::dataset();
        let o = brute_force_oracle(&ds, Voting::Plurality, SizeRange::proper(3), false).unwrap();
        assert_eq!(o.len(), 3);
        assert_eq!(o.reference_accuracy(), 1.0);
        // {m0, m1}: tie on s3/s4 goes to m0 (more accurate) -> perfect
        assert_eq!(o.accuracy(team(&[0, 1])), Some(1.0));
        assert_eq!(o.accuracy(team(&[1, 2])), Some(0.8));
        assert_eq!(o.good().count(), 2);
    }

    #[test]
    fn precision_from_published_accuracies() {
        // four selected teams at 97.15, 96.87, 96.63, 96.18 vs reference 96.33,
        // expressed as correct counts out of 10000
        let counts = [9715u64, 9687, 9663, 9618];
        let teams = [team(&[0, 1]), team(&[0, 2]), team(&[1, 2]), team(&[0, 3])];
        let mut entries: Vec<(Team, u64)> = teams.iter().copied().zip(counts).collect();
        entries.sort_unstable_by_key(|e| e.0);
        let oracle = OracleTable {
            voting: Voting::Plurality,
            num_models: 10,
            num_samples: 10_000,
            reference_correct: 9633,
            entries,
        };
        let q = prune_quality(&teams, &oracle, QualityScope::AllSizes).unwrap();
        assert_eq!(q.precision, 0.75);
        assert_eq!(q.recall, 1.0);
        assert_eq!(q.cost_reduction_range, Some((0.8, 0.8)));
        assert!((cost_reduction(10, 3) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn quality_edge_cases() {
        let ds = fixture::dataset();
        let o = brute_force_oracle(&ds, Voting::Plurality, SizeRange::proper(3), false).unwrap();
        let good: Vec<Team> = o.good().collect();
        let q = prune_quality(&good, &o, QualityScope::Size(2)).unwrap();
        assert_eq!((q.precision, q.recall), (1.0, 1.0));
        let q = prune_quality(&[], &o, QualityScope::Size(2)).unwrap();
        assert!(q.empty_selection);
        assert_eq!(q.precision, 0.0);
        assert!(prune_quality(&good, &o, QualityScope::Size(3)).is_err());
        assert!(prune_quality(&[team(&[0, 1, 2])], &o, QualityScope::Size(2)).is_err());
    }
}
