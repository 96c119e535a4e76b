//! Baseline ensemble diversity measures over a sample subset.
//!
//! All four measures reduce to the per-model correct counts and the pairwise
//! both-correct counts on the subset, which is what [`SubsetStats`] caches:
//!
//! * kappa and disagreement are means over member pairs of 2x2 contingency
//!   statistics;
//! * Kohavi-Wolpert variance needs `sum_x l(x)` and `sum_x l(x)^2` where `l(x)`
//!   is the number of members correct on `x`, and `sum_x l(x)^2` expands into
//!   pairwise both-correct counts;
//! * generalized diversity needs the expected fraction of failing members and
//!   of failing ordered pairs, which again are single-model and pairwise
//!   counts.
//!
//! Higher is more diverse for every measure; kappa is reported as `1 - kappa`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::data::{CorrectnessMatrix, SampleMask};
use crate::error::{Error, Result};
use crate::team::Team;

/// One of the four diversity measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    CohensKappa,
    Disagreement,
    KohaviWolpert,
    GeneralizedDiversity,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::CohensKappa,
        Metric::Disagreement,
        Metric::KohaviWolpert,
        Metric::GeneralizedDiversity,
    ];

    /// Short name of the baseline measure (`ck`, `bd`, `kw`, `gd`).
    pub fn name(self) -> &'static str {
        match self {
            Metric::CohensKappa => "ck",
            Metric::Disagreement => "bd",
            Metric::KohaviWolpert => "kw",
            Metric::GeneralizedDiversity => "gd",
        }
    }

    /// Name of the focal variant (`f-ck`, ...).
    pub fn focal_name(self) -> &'static str {
        match self {
            Metric::CohensKappa => "f-ck",
            Metric::Disagreement => "f-bd",
            Metric::KohaviWolpert => "f-kw",
            Metric::GeneralizedDiversity => "f-gd",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ck" => Ok(Metric::CohensKappa),
            "bd" => Ok(Metric::Disagreement),
            "kw" => Ok(Metric::KohaviWolpert),
            "gd" => Ok(Metric::GeneralizedDiversity),
            other => Err(Error::InvalidParameter(alloc::format!(
                "unknown metric {other:?} (expected ck, bd, kw or gd)"
            ))),
        }
    }
}

bitflags::bitflags! {
    /// Conditions under which a score fell back to a conventional value.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
    pub struct Degeneracy: u8 {
        /// Some member pair had a zero kappa denominator; that pair counted as 0.
        const KAPPA_UNDEFINED = 0b0000_0001;
        /// No member failed on the subset; generalized diversity set to 1.
        const NO_FAILURES     = 0b0000_0010;
        /// A focal scaling group was flat (range within 1e-12); scaled value set to 0.5.
        const FLAT_GROUP      = 0b0000_0100;
        /// Every member was error-free, so no focal score exists; FQ set to 0.5.
        const NO_FOCAL        = 0b0000_1000;
    }
}

impl Degeneracy {
    /// Names of the set flags joined with `|`, or empty.
    pub fn render(self) -> alloc::string::String {
        let mut out = alloc::string::String::new();
        for (name, _) in self.iter_names() {
            if !out.is_empty() {
                out.push('|');
            }
            out.push_str(&name.to_ascii_lowercase());
        }
        out
    }
}

/// A diversity value together with any degeneracy it hit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub value: f64,
    pub flags: Degeneracy,
}

impl Score {
    fn clean(value: f64) -> Self {
        Score {
            value,
            flags: Degeneracy::empty(),
        }
    }
}

/// 2x2 correctness contingency of two models over a sample subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PairwiseCounts {
    /// Both correct.
    pub n11: u64,
    /// First correct, second wrong.
    pub n10: u64,
    /// First wrong, second correct.
    pub n01: u64,
    /// Both wrong.
    pub n00: u64,
}

impl PairwiseCounts {
    pub fn total(&self) -> u64 {
        self.n11 + self.n10 + self.n01 + self.n00
    }

    /// Cohen's kappa of the two correctness vectors, `None` when the
    /// denominator vanishes.
    pub fn kappa(&self) -> Option<f64> {
        let (a, b, c, d) = (
            self.n11 as f64,
            self.n10 as f64,
            self.n01 as f64,
            self.n00 as f64,
        );
        let denom = (a + b) * (b + d) + (a + c) * (c + d);
        if denom == 0.0 {
            None
        } else {
            Some(2.0 * (a * d - c * b) / denom)
        }
    }

    /// Fraction of the subset on which exactly one of the two is correct.
    pub fn disagreement(&self) -> f64 {
        (self.n10 + self.n01) as f64 / self.total() as f64
    }
}

/// Contingency counts of models `a` and `b` restricted to `subset`.
pub fn pairwise_counts(
    cm: &CorrectnessMatrix,
    a: usize,
    b: usize,
    subset: &[usize],
) -> Result<PairwiseCounts> {
    if subset.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    if a == b {
        return Err(Error::InvalidParameter(
            "pairwise counts need two distinct models".into(),
        ));
    }
    let mut counts = PairwiseCounts::default();
    for &n in subset {
        match (cm.get(a, n), cm.get(b, n)) {
            (true, true) => counts.n11 += 1,
            (true, false) => counts.n10 += 1,
            (false, true) => counts.n01 += 1,
            (false, false) => counts.n00 += 1,
        }
    }
    Ok(counts)
}

/// `p[i]`: fraction of subset samples on which exactly `i` members fail.
#[derive(Debug, Clone, PartialEq)]
pub struct FailureHistogram {
    pub p: Vec<f64>,
}

pub fn failure_histogram(
    cm: &CorrectnessMatrix,
    team: Team,
    subset: &[usize],
) -> Result<FailureHistogram> {
    team.validate(cm.num_models(), 1)?;
    if subset.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let members = team.to_vec();
    let mut counts = vec![0u64; members.len() + 1];
    for &n in subset {
        let failures = members.iter().filter(|&&m| !cm.get(m, n)).count();
        counts[failures] += 1;
    }
    let total = subset.len() as f64;
    Ok(FailureHistogram {
        p: counts.into_iter().map(|c| c as f64 / total).collect(),
    })
}

impl FailureHistogram {
    /// Generalized diversity `1 - p(2)/p(1)`.
    pub fn generalized_diversity(&self) -> Score {
        let s = (self.p.len() - 1) as f64;
        let mut p1 = 0.0;
        let mut p2 = 0.0;
        for (i, &pi) in self.p.iter().enumerate().skip(1) {
            let i = i as f64;
            p1 += i / s * pi;
            if s > 1.0 {
                p2 += i / s * ((i - 1.0) / (s - 1.0)) * pi;
            }
        }
        if p1 == 0.0 {
            Score {
                value: 1.0,
                flags: Degeneracy::NO_FAILURES,
            }
        } else {
            Score::clean(1.0 - p2 / p1)
        }
    }
}

/// Single-model and pairwise correct counts of every model on one subset.
#[derive(Debug, Clone)]
pub struct SubsetStats {
    num_models: usize,
    size: u64,
    correct: Vec<u64>,
    // symmetric num_models x num_models, diagonal = correct
    both: Vec<u64>,
}

impl SubsetStats {
    pub fn new(cm: &CorrectnessMatrix, mask: &SampleMask) -> Self {
        let m = cm.num_models();
        let correct: Vec<u64> = (0..m).map(|a| cm.correct_in(a, mask) as u64).collect();
        let mut both = vec![0u64; m * m];
        for a in 0..m {
            both[a * m + a] = correct[a];
            for b in a + 1..m {
                let c = cm.both_correct_in(a, b, mask) as u64;
                both[a * m + b] = c;
                both[b * m + a] = c;
            }
        }
        SubsetStats {
            num_models: m,
            size: mask.count() as u64,
            correct,
            both,
        }
    }

    /// Number of samples in the subset.
    pub fn size(&self) -> u64 {
        self.size
    }

    pub fn pair(&self, a: usize, b: usize) -> PairwiseCounts {
        let n11 = self.both[a * self.num_models + b];
        let ca = self.correct[a];
        let cb = self.correct[b];
        PairwiseCounts {
            n11,
            n10: ca - n11,
            n01: cb - n11,
            n00: self.size + n11 - ca - cb,
        }
    }

    /// Scores `team` (at least two members) with `metric` on this subset.
    pub fn score(&self, metric: Metric, team: Team) -> Result<Score> {
        team.validate(self.num_models, 2)?;
        if self.size == 0 {
            return Err(Error::EmptySampleSet);
        }
        Ok(match metric {
            Metric::CohensKappa => self.kappa_diversity(team),
            Metric::Disagreement => self.disagreement(team),
            Metric::KohaviWolpert => self.kw_variance(team),
            Metric::GeneralizedDiversity => self.generalized_diversity(team),
        })
    }

    fn pairs(team: Team) -> impl Iterator<Item = (usize, usize)> {
        team.members()
            .enumerate()
            .flat_map(move |(i, a)| team.members().skip(i + 1).map(move |b| (a, b)))
    }

    fn pair_count(team: Team) -> f64 {
        let s = team.len() as f64;
        s * (s - 1.0) / 2.0
    }

    fn kappa_diversity(&self, team: Team) -> Score {
        let mut flags = Degeneracy::empty();
        let mut sum = 0.0;
        for (a, b) in Self::pairs(team) {
            match self.pair(a, b).kappa() {
                Some(k) => sum += 1.0 - k,
                None => flags |= Degeneracy::KAPPA_UNDEFINED,
            }
        }
        Score {
            value: sum / Self::pair_count(team),
            flags,
        }
    }

    fn disagreement(&self, team: Team) -> Score {
        let total: f64 = Self::pairs(team)
            .map(|(a, b)| self.pair(a, b).disagreement())
            .sum();
        Score::clean(total / Self::pair_count(team))
    }

    fn kw_variance(&self, team: Team) -> Score {
        let s = team.len() as u64;
        let sum_l: u64 = team.members().map(|a| self.correct[a]).sum();
        let cross: u64 = Self::pairs(team).map(|(a, b)| self.pair(a, b).n11).sum();
        let sum_l2 = sum_l + 2 * cross;
        let numer = s * sum_l - sum_l2;
        Score::clean(numer as f64 / (self.size * s * s) as f64)
    }

    fn generalized_diversity(&self, team: Team) -> Score {
        let s = team.len() as u64;
        let failures: u64 = team.members().map(|a| self.size - self.correct[a]).sum();
        if failures == 0 {
            return Score {
                value: 1.0,
                flags: Degeneracy::NO_FAILURES,
            };
        }
        let both_wrong: u64 = Self::pairs(team).map(|(a, b)| self.pair(a, b).n00).sum();
        // p(2)/p(1) = 2 * sum n00 / ((S - 1) * sum failures)
        let ratio = (2 * both_wrong) as f64 / ((s - 1) * failures) as f64;
        Score::clean(1.0 - ratio)
    }
}

fn stats_for(cm: &CorrectnessMatrix, team: Team, subset: &[usize]) -> Result<SubsetStats> {
    team.validate(cm.num_models(), 2)?;
    if subset.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    Ok(SubsetStats::new(
        cm,
        &SampleMask::from_indices(cm.num_samples(), subset),
    ))
}

/// Mean over member pairs of `1 - kappa`.
pub fn cohens_kappa_diversity(
    cm: &CorrectnessMatrix,
    team: Team,
    subset: &[usize],
) -> Result<Score> {
    stats_for(cm, team, subset)?.score(Metric::CohensKappa, team)
}

/// Mean over member pairs of the fraction of samples where exactly one is right.
pub fn binary_disagreement(cm: &CorrectnessMatrix, team: Team, subset: &[usize]) -> Result<Score> {
    stats_for(cm, team, subset)?.score(Metric::Disagreement, team)
}

/// `1/(|X| S^2) * sum_x l(x) (S - l(x))`.
pub fn kw_variance(cm: &CorrectnessMatrix, team: Team, subset: &[usize]) -> Result<Score> {
    stats_for(cm, team, subset)?.score(Metric::KohaviWolpert, team)
}

/// Generalized diversity computed from the failure histogram.
pub fn generalized_diversity(
    cm: &CorrectnessMatrix,
    team: Team,
    subset: &[usize],
) -> Result<Score> {
    team.validate(cm.num_models(), 2)?;
    Ok(failure_histogram(cm, team, subset)?.generalized_diversity())
}

/// Dispatches to the baseline measure named by `metric`.
pub fn score_on_subset(
    metric: Metric,
    cm: &CorrectnessMatrix,
    team: Team,
    subset: &[usize],
) -> Result<Score> {
    match metric {
        Metric::CohensKappa => cohens_kappa_diversity(cm, team, subset),
        Metric::Disagreement => binary_disagreement(cm, team, subset),
        Metric::KohaviWolpert => kw_variance(cm, team, subset),
        Metric::GeneralizedDiversity => generalized_diversity(cm, team, subset),
    }
}

/// Baseline scores of `teams` over every sample.
pub fn score_teams(
    metric: Metric,
    cm: &CorrectnessMatrix,
    teams: &[Team],
) -> Result<Vec<(Team, Score)>> {
    let stats = SubsetStats::new(cm, &SampleMask::full(cm.num_samples()));
    teams
        .iter()
        .map(|&t| stats.score(metric, t).map(|s| (t, s)))
        .collect()
}
