//! Canonical ensemble teams and candidate-set enumeration.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::error::{Error, Result};

/// Hard ceiling on ensemble size: a team is stored as one 64-bit word.
pub const MAX_MODELS: usize = 64;

/// Largest `M` enumerated without an explicit override.
pub const ENUMERATION_LIMIT: usize = 25;

/// A set of member-model indices.
///
/// Stored as a bitmask so equality is canonical and subset tests are a single
/// AND. Ordering is lexicographic over the ascending member list, which is the
/// order [`enumerate_teams`] emits within one size.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Team(u64);

impl Team {
    /// Builds a team from member indices in any order. Duplicates are rejected.
    pub fn new(members: &[usize]) -> Result<Self> {
        let mut mask = 0u64;
        for &m in members {
            if m >= MAX_MODELS {
                return Err(Error::InvalidTeam(alloc::format!(
                    "member index {m} exceeds the {MAX_MODELS}-model limit"
                )));
            }
            let bit = 1u64 << m;
            if mask & bit != 0 {
                return Err(Error::InvalidTeam(alloc::format!("duplicate member {m}")));
            }
            mask |= bit;
        }
        if mask == 0 {
            return Err(Error::InvalidTeam("team has no members".into()));
        }
        Ok(Team(mask))
    }

    pub const fn from_mask(mask: u64) -> Self {
        Team(mask)
    }

    /// The full ensemble `{0, .., m-1}`.
    pub fn full(m: usize) -> Self {
        debug_assert!(m <= MAX_MODELS);
        if m == MAX_MODELS {
            Team(u64::MAX)
        } else {
            Team((1u64 << m) - 1)
        }
    }

    pub const fn mask(self) -> u64 {
        self.0
    }

    pub const fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub const fn contains(self, model: usize) -> bool {
        model < MAX_MODELS && self.0 & (1u64 << model) != 0
    }

    pub const fn is_subset_of(self, other: Team) -> bool {
        self.0 & other.0 == self.0
    }

    /// Largest member index, if any.
    pub fn max_member(self) -> Option<usize> {
        if self.0 == 0 {
            None
        } else {
            Some(63 - self.0.leading_zeros() as usize)
        }
    }

    /// Members in ascending order.
    pub fn members(self) -> Members {
        Members(self.0)
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.members().collect()
    }

    /// Checks the team is usable against an `m`-model ensemble.
    pub fn validate(self, num_models: usize, min_size: usize) -> Result<()> {
        if let Some(top) = self.max_member() {
            if top >= num_models {
                return Err(Error::InvalidTeam(alloc::format!(
                    "team {self} references model {top} but the ensemble has {num_models}"
                )));
            }
        }
        if self.len() < min_size {
            return Err(Error::InvalidTeam(alloc::format!(
                "team {self} has {} members, need at least {min_size}",
                self.len()
            )));
        }
        Ok(())
    }

    /// Index-string form: `"0123"` when every index is a single digit,
    /// dash-separated (`"0-11-13"`) otherwise.
    pub fn render(self) -> String {
        alloc::format!("{self}")
    }

    /// Parses the index-string form produced by [`Team::render`]. A string
    /// without dashes is read one digit per member.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidTeam(alloc::format!("cannot parse team {s:?}"));
        let mut members = Vec::new();
        if s.contains('-') {
            for part in s.split('-') {
                members.push(part.parse::<usize>().map_err(|_| bad())?);
            }
        } else {
            for c in s.chars() {
                members.push(c.to_digit(10).ok_or_else(bad)? as usize);
            }
        }
        Team::new(&members)
    }
}

impl Ord for Team {
    fn cmp(&self, other: &Self) -> Ordering {
        self.members().cmp(other.members())
    }
}

impl PartialOrd for Team {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Team {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wide = self.max_member().is_some_and(|m| m >= 10);
        for (i, m) in self.members().enumerate() {
            if wide && i > 0 {
                f.write_str("-")?;
            }
            write!(f, "{m}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Team {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Team({self})")
    }
}

/// Ascending member iterator.
#[derive(Clone)]
pub struct Members(u64);

impl Iterator for Members {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let idx = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(idx)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Members {}

/// `C(n, k)` in exact integer arithmetic.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as u64
}

/// Number of proper sub-ensembles of size `2..=m-1`: `2^m - (2 + m)`.
pub fn candidate_count(m: usize) -> u64 {
    assert!((2..64).contains(&m));
    (1u64 << m) - (2 + m as u64)
}

/// All teams of exactly `size` members drawn from `num_models`, in
/// lexicographic order.
#[derive(Clone)]
pub struct TeamsOfSize {
    num_models: usize,
    indices: Vec<usize>,
    done: bool,
}

impl TeamsOfSize {
    pub fn new(num_models: usize, size: usize) -> Self {
        let done = size == 0 || size > num_models || num_models > MAX_MODELS;
        TeamsOfSize {
            num_models,
            indices: (0..size).collect(),
            done,
        }
    }
}

impl Iterator for TeamsOfSize {
    type Item = Team;

    fn next(&mut self) -> Option<Team> {
        if self.done {
            return None;
        }
        let mask = self.indices.iter().fold(0u64, |acc, &i| acc | (1u64 << i));
        let k = self.indices.len();
        let n = self.num_models;
        // advance to the next combination
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.indices[i] < n - k + i {
                self.indices[i] += 1;
                for j in i + 1..k {
                    self.indices[j] = self.indices[j - 1] + 1;
                }
                break;
            }
        }
        Some(Team(mask))
    }
}

/// Inclusive size range for enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SizeRange {
    pub lo: usize,
    pub hi: usize,
}

impl SizeRange {
    pub const fn new(lo: usize, hi: usize) -> Self {
        SizeRange { lo, hi }
    }

    /// Every proper sub-ensemble: sizes `2..=m-1`.
    pub const fn proper(m: usize) -> Self {
        SizeRange { lo: 2, hi: m - 1 }
    }

    pub fn contains(&self, size: usize) -> bool {
        (self.lo..=self.hi).contains(&size)
    }

    pub fn sizes(&self) -> core::ops::RangeInclusive<usize> {
        self.lo..=self.hi
    }

    /// Total number of teams in the range over `m` models.
    pub fn count(&self, m: usize) -> u64 {
        self.sizes().map(|s| binomial(m, s)).sum()
    }

    /// Rejects ranges that are empty or fall outside `[2, m]`.
    pub fn check(&self, m: usize) -> Result<()> {
        if self.lo < 2 || self.lo > self.hi || self.hi > m {
            return Err(Error::InvalidParameter(alloc::format!(
                "size range [{}, {}] must satisfy 2 <= lo <= hi <= {m}",
                self.lo,
                self.hi
            )));
        }
        Ok(())
    }
}

/// Checks the combinatorial guard shared by every exhaustive pass.
pub fn check_guard(num_models: usize, limit: usize, allow_large: bool) -> Result<()> {
    if num_models > MAX_MODELS || (num_models > limit && !allow_large) {
        return Err(Error::CombinatorialGuard {
            models: num_models,
            limit: if allow_large { MAX_MODELS } else { limit },
        });
    }
    Ok(())
}

/// Streams every team with size in `range`, sizes ascending and lexicographic
/// within each size.
pub fn enumerate_teams(
    num_models: usize,
    range: SizeRange,
    allow_large: bool,
) -> Result<impl Iterator<Item = Team> + Clone> {
    check_guard(num_models, ENUMERATION_LIMIT, allow_large)?;
    range.check(num_models)?;
    Ok(range
        .sizes()
        .flat_map(move |s| TeamsOfSize::new(num_models, s)))
}
