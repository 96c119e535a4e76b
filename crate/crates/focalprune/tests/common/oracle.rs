//! Brute-force reference implementations written straight from the textbook
//! definitions. Nothing here calls into the library under test: inputs are
//! plain label vectors and every quantity is recomputed sample by sample.

#![allow(dead_code)]

use std::collections::BTreeMap;

/// Plain prediction log: `preds[m][n]` is model `m`'s label on sample `n`.
#[derive(Debug, Clone)]
pub struct Log {
    pub truth: Vec<u32>,
    pub preds: Vec<Vec<u32>>,
    pub classes: u32,
}

impl Log {
    pub fn models(&self) -> usize {
        self.preds.len()
    }

    pub fn samples(&self) -> usize {
        self.truth.len()
    }

    pub fn correct(&self) -> Vec<Vec<bool>> {
        self.preds
            .iter()
            .map(|row| row.iter().zip(&self.truth).map(|(p, t)| p == t).collect())
            .collect()
    }
}

/// Every team with size in `lo..=hi`, ordered by size then member list.
pub fn teams(m: usize, lo: usize, hi: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = (0u64..1 << m)
        .map(|mask| (0..m).filter(|i| mask >> i & 1 == 1).collect::<Vec<_>>())
        .filter(|t| (lo..=hi).contains(&t.len()))
        .collect();
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out
}

fn pairs(team: &[usize]) -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    for i in 0..team.len() {
        for j in i + 1..team.len() {
            v.push((team[i], team[j]));
        }
    }
    v
}

/// Cohen's kappa from observed and chance agreement; `None` when chance
/// agreement is total.
pub fn kappa(c: &[Vec<bool>], a: usize, b: usize, subset: &[usize]) -> Option<f64> {
    let n = subset.len() as u64;
    let agree = subset.iter().filter(|&&x| c[a][x] == c[b][x]).count() as u64;
    let ra = subset.iter().filter(|&&x| c[a][x]).count() as u64;
    let rb = subset.iter().filter(|&&x| c[b][x]).count() as u64;
    // chance agreement numerator over n^2, kept integral for the zero test
    let chance = ra * rb + (n - ra) * (n - rb);
    if chance == n * n {
        return None;
    }
    let po = agree as f64 / n as f64;
    let pe = chance as f64 / (n * n) as f64;
    Some((po - pe) / (1.0 - pe))
}

/// Mean over pairs of `1 - kappa`, an undefined pair contributing 0.
pub fn ck(c: &[Vec<bool>], team: &[usize], subset: &[usize]) -> f64 {
    let ps = pairs(team);
    ps.iter()
        .map(|&(a, b)| kappa(c, a, b, subset).map_or(0.0, |k| 1.0 - k))
        .sum::<f64>()
        / ps.len() as f64
}

pub fn bd(c: &[Vec<bool>], team: &[usize], subset: &[usize]) -> f64 {
    let ps = pairs(team);
    ps.iter()
        .map(|&(a, b)| {
            subset.iter().filter(|&&x| c[a][x] != c[b][x]).count() as f64 / subset.len() as f64
        })
        .sum::<f64>()
        / ps.len() as f64
}

/// `1/(N S^2) * sum_x l(x) (S - l(x))`.
pub fn kw(c: &[Vec<bool>], team: &[usize], subset: &[usize]) -> f64 {
    let s = team.len() as f64;
    let total: f64 = subset
        .iter()
        .map(|&x| {
            let l = team.iter().filter(|&&m| c[m][x]).count() as f64;
            l * (s - l)
        })
        .sum();
    total / (subset.len() as f64 * s * s)
}

/// `1 - p(2)/p(1)` from the distribution of the number of failing members;
/// 1 when nobody fails.
pub fn gd(c: &[Vec<bool>], team: &[usize], subset: &[usize]) -> f64 {
    let s = team.len();
    let mut hist = vec![0usize; s + 1];
    for &x in subset {
        hist[team.iter().filter(|&&m| !c[m][x]).count()] += 1;
    }
    let n = subset.len() as f64;
    let sf = s as f64;
    let p1: f64 = (1..=s).map(|i| i as f64 / sf * hist[i] as f64 / n).sum();
    let p2: f64 = (1..=s)
        .map(|i| (i as f64 / sf) * ((i as f64 - 1.0) / (sf - 1.0)) * hist[i] as f64 / n)
        .sum();
    if p1 == 0.0 {
        1.0
    } else {
        1.0 - p2 / p1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    Ck,
    Bd,
    Kw,
    Gd,
}

pub const MEASURES: [Measure; 4] = [Measure::Ck, Measure::Bd, Measure::Kw, Measure::Gd];

pub fn measure(which: Measure, c: &[Vec<bool>], team: &[usize], subset: &[usize]) -> f64 {
    match which {
        Measure::Ck => ck(c, team, subset),
        Measure::Bd => bd(c, team, subset),
        Measure::Kw => kw(c, team, subset),
        Measure::Gd => gd(c, team, subset),
    }
}

/// Accuracy ranks (1 = least accurate, ties averaged) normalized to sum to 1,
/// in member order.
pub fn rank_weights(team: &[usize], correct_counts: &[usize]) -> Vec<f64> {
    let s = team.len();
    let ranks: Vec<f64> = team
        .iter()
        .map(|&m| {
            let below = team
                .iter()
                .filter(|&&o| correct_counts[o] < correct_counts[m])
                .count();
            let equal = team
                .iter()
                .filter(|&&o| correct_counts[o] == correct_counts[m])
                .count();
            // tied block occupies ranks below+1 ..= below+equal
            below as f64 + (equal as f64 + 1.0) / 2.0
        })
        .collect();
    let total = (s * (s + 1)) as f64 / 2.0;
    ranks.into_iter().map(|r| r / total).collect()
}

/// Focal score of every team in `candidates`. For each focal model the raw
/// score of a team containing it is the measure on that model's misses;
/// raw scores are min-max scaled among candidates of the same size holding
/// the same focal model (0.5 when flat, i.e. range at most 1e-12) and combined with accuracy-rank
/// weights over the members that have any misses.
pub fn focal_scores(
    which: Measure,
    c: &[Vec<bool>],
    candidates: &[Vec<usize>],
) -> BTreeMap<Vec<usize>, f64> {
    focal_detail(which, c, candidates)
        .into_iter()
        .map(|(t, (fq, _))| (t, fq))
        .collect()
}

/// Like [`focal_scores`], paired with the same weighted mean taken over the
/// unscaled raw scores.
pub fn focal_detail(
    which: Measure,
    c: &[Vec<bool>],
    candidates: &[Vec<usize>],
) -> BTreeMap<Vec<usize>, (f64, f64)> {
    let m = c.len();
    let n = c[0].len();
    let counts: Vec<usize> = c
        .iter()
        .map(|row| row.iter().filter(|&&b| b).count())
        .collect();
    let misses: Vec<Vec<usize>> = (0..m)
        .map(|f| (0..n).filter(|&x| !c[f][x]).collect())
        .collect();

    let mut scaled: BTreeMap<(Vec<usize>, usize), (f64, f64)> = BTreeMap::new();
    let sizes: std::collections::BTreeSet<usize> = candidates.iter().map(Vec::len).collect();
    for &size in &sizes {
        for (f, miss) in misses.iter().enumerate() {
            if miss.is_empty() {
                continue;
            }
            let group: Vec<&Vec<usize>> = candidates
                .iter()
                .filter(|t| t.len() == size && t.contains(&f))
                .collect();
            if group.is_empty() {
                continue;
            }
            let raw: Vec<f64> = group.iter().map(|t| measure(which, c, t, miss)).collect();
            let lo = raw.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for (t, r) in group.iter().zip(&raw) {
                // a range below 1e-12 is rounding noise between equal scores
                let v = if hi - lo > 1e-12 {
                    (r - lo) / (hi - lo)
                } else {
                    0.5
                };
                scaled.insert(((*t).clone(), f), (v, *r));
            }
        }
    }

    candidates
        .iter()
        .map(|t| {
            let w = rank_weights(t, &counts);
            let (mut num, mut raw_num, mut den) = (0.0, 0.0, 0.0);
            for (k, &f) in t.iter().enumerate() {
                if let Some((v, r)) = scaled.get(&(t.clone(), f)) {
                    num += w[k] * v;
                    raw_num += w[k] * r;
                    den += w[k];
                }
            }
            let value = if den == 0.0 {
                (0.5, 0.0)
            } else {
                (num / den, raw_num / den)
            };
            (t.clone(), value)
        })
        .collect()
}

/// Plurality label: most votes, then the largest summed correct count of the
/// voters, then the smallest class.
pub fn plurality(log: &Log, team: &[usize], sample: usize, correct_counts: &[usize]) -> u32 {
    let mut best: Option<(usize, usize, u32)> = None;
    for k in 0..log.classes {
        let voters: Vec<usize> = team
            .iter()
            .copied()
            .filter(|&m| log.preds[m][sample] == k)
            .collect();
        let key = (
            voters.len(),
            voters.iter().map(|&m| correct_counts[m]).sum::<usize>(),
            k,
        );
        best = match best {
            Some(b) if (b.0, b.1) >= (key.0, key.1) => Some(b),
            _ => Some(key),
        };
    }
    best.unwrap().2
}

pub fn plurality_correct(log: &Log, team: &[usize]) -> usize {
    let c = log.correct();
    let counts: Vec<usize> = c
        .iter()
        .map(|row| row.iter().filter(|&&b| b).count())
        .collect();
    (0..log.samples())
        .filter(|&x| plurality(log, team, x, &counts) == log.truth[x])
        .count()
}

/// Precision, recall, accuracy range and cost-reduction range of a selection.
#[derive(Debug, Clone, PartialEq)]
pub struct Quality {
    pub precision: f64,
    pub recall: f64,
    pub accuracy_range: Option<(f64, f64)>,
    pub cost_range: Option<(f64, f64)>,
    pub hits: usize,
    pub good_in_scope: usize,
}

/// `universe` holds every team the good set is drawn from; `scope_size`
/// restricts recall to one size when set.
pub fn quality(
    log: &Log,
    selected: &[Vec<usize>],
    universe: &[Vec<usize>],
    scope_size: Option<usize>,
) -> Quality {
    let m = log.models();
    let n = log.samples() as f64;
    let full: Vec<usize> = (0..m).collect();
    let reference = plurality_correct(log, &full);
    let good = |t: &[usize]| plurality_correct(log, t) >= reference;
    let in_scope = |t: &[usize]| scope_size.is_none_or(|s| t.len() == s);
    let good_in_scope = universe.iter().filter(|t| in_scope(t) && good(t)).count();
    let hits = selected.iter().filter(|t| good(t)).count();
    let scoped_hits = selected.iter().filter(|t| in_scope(t) && good(t)).count();
    let accs: Vec<f64> = selected
        .iter()
        .map(|t| plurality_correct(log, t) as f64 / n)
        .collect();
    let costs: Vec<f64> = selected
        .iter()
        .map(|t| (m - t.len()) as f64 / m as f64)
        .collect();
    let range = |v: &[f64]| {
        if v.is_empty() {
            None
        } else {
            Some((
                v.iter().cloned().fold(f64::INFINITY, f64::min),
                v.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            ))
        }
    };
    Quality {
        precision: if selected.is_empty() {
            0.0
        } else {
            hits as f64 / selected.len() as f64
        },
        recall: if good_in_scope == 0 {
            0.0
        } else {
            scoped_hits as f64 / good_in_scope as f64
        },
        accuracy_range: range(&accs),
        cost_range: range(&costs),
        hits,
        good_in_scope,
    }
}
