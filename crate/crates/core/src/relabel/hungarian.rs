//! Dense O(K^3) Hungarian solver with a deterministic lexicographic tie-break.

use crate::error::{Error, Result};
use crate::model::Permutation;

/// Largest matrix the solver accepts.
pub const MAX_ASSIGNMENT_K: usize = 64;

/// A square matrix of finite, non-negative assignment costs.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    k: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != k) {
            return Err(Error::LengthMismatch {
                what: "cost matrix row",
                expected: k,
                actual: r.len(),
            });
        }
        Self::from_row_major(k, rows.into_iter().flatten().collect())
    }

    pub fn from_row_major(k: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != k * k {
            return Err(Error::LengthMismatch {
                what: "cost matrix",
                expected: k * k,
                actual: data.len(),
            });
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("cost matrix entry {v}")));
        }
        if let Some(v) = data.iter().find(|v| **v < 0.0) {
            return Err(Error::InvalidConfig(format!("cost matrix entry {v} is negative")));
        }
        Ok(Self { k, data })
    }

    /// Turns scores to be maximised into costs: `max(score) - score`.
    pub fn from_scores(k: usize, scores: &[f64]) -> Result<Self> {
        if let Some(v) = scores.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("score matrix entry {v}")));
        }
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::from_row_major(k, scores.iter().map(|s| max - s).collect())
    }

    /// Turns arbitrary finite costs into non-negative ones by a constant shift.
    pub fn from_shifted(k: usize, costs: &[f64]) -> Result<Self> {
        if let Some(v) = costs.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("cost matrix entry {v}")));
        }
        let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
        Self::from_row_major(k, costs.iter().map(|c| c - min).collect())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.k + col]
    }

    /// `sum_h cost[h, nu_h]`, accumulated in row order.
    pub fn total(&self, nu: &Permutation) -> f64 {
        (0..self.k).map(|h| self.get(h, nu.get(h))).sum()
    }
}

/// Column permutation `nu` minimising `sum_h cost[h, nu_h]`.
///
/// Among several optima the lexicographically smallest `nu` is returned.
pub fn hungarian(cost: &CostMatrix) -> Result<Permutation> {
    let k = cost.k;
    if k > MAX_ASSIGNMENT_K {
        return Err(Error::TooManyComponents {
            k,
            limit: MAX_ASSIGNMENT_K,
            hint: "the assignment solver is capped",
        });
    }
    if k == 0 {
        return Ok(Permutation::identity(0));
    }
    let (assignment, u, v) = solve(cost);
    let raw = Permutation::new(assignment).expect("hungarian yields a bijection");
    let scale = cost.data.iter().fold(1.0f64, |a, c| a.max(c.abs()));
    let tol = 1e-10 * scale * k as f64;
    let tight = |h: usize, j: usize| cost.get(h, j) - u[h] - v[j] <= tol;
    let lex = lexicographic_tight_matching(k, &tight, raw.as_slice());
    match lex {
        Some(p) if cost.total(&p) <= cost.total(&raw) => Ok(p),
        _ => Ok(raw),
    }
}

/// Shortest augmenting path Hungarian method. Returns the row-to-column
/// assignment and the dual potentials (reduced costs are `c - u - v >= 0`).
fn solve(cost: &CostMatrix) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let n = cost.k;
    let inf = f64::INFINITY;
    // 1-based with a virtual column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost.get(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
    }
    (assignment, u[1..].to_vec(), v[1..].to_vec())
}

/// Lexicographically smallest perfect matching using only tight edges.
fn lexicographic_tight_matching(
    k: usize,
    tight: &dyn Fn(usize, usize) -> bool,
    start: &[usize],
) -> Option<Permutation> {
    let mut fixed: Vec<usize> = Vec::with_capacity(k);
    let mut col_used = vec![false; k];
    for h in 0..k {
        let mut chosen = None;
        for j in 0..k {
            if col_used[j] || !tight(h, j) {
                continue;
            }
            if j == start[h] && fixed.iter().zip(start).all(|(a, b)| a == b) {
                // the solver's own matching completes this prefix
                chosen = Some(j);
                break;
            }
            col_used[j] = true;
            let ok = completes(k, h + 1, &col_used, tight);
            col_used[j] = false;
            if ok {
                chosen = Some(j);
                break;
            }
        }
        let j = chosen?;
        col_used[j] = true;
        fixed.push(j);
    }
    Permutation::new(fixed).ok()
}

/// Can rows `from..k` be matched to the unused columns through tight edges?
fn completes(k: usize, from: usize, col_used: &[bool], tight: &dyn Fn(usize, usize) -> bool) -> bool {
    let mut owner: Vec<Option<usize>> = vec![None; k];
    for row in from..k {
        let mut seen = vec![false; k];
        if !augment(row, k, col_used, tight, &mut owner, &mut seen) {
            return false;
        }
    }
    true
}

fn augment(
    row: usize,
    k: usize,
    col_used: &[bool],
    tight: &dyn Fn(usize, usize) -> bool,
    owner: &mut [Option<usize>],
    seen: &mut [bool],
) -> bool {
    for j in 0..k {
        if col_used[j] || seen[j] || !tight(row, j) {
            continue;
        }
        seen[j] = true;
        let free = match owner[j] {
            None => true,
            Some(other) => augment(other, k, col_used, tight, owner, seen),
        };
        if free {
            owner[j] = Some(row);
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive oracle: first minimum in lexicographic order.
    fn brute_force(cost: &CostMatrix) -> (Permutation, f64) {
        let mut best: Option<(Permutation, f64)> = None;
        for p in Permutation::all(cost.k()) {
            let t = cost.total(&p);
            if best.as_ref().is_none_or(|(_, b)| t < *b) {
                best = Some((p, t));
            }
        }
        best.unwrap()
    }

    #[test]
    fn zero_matrix_gives_identity() {
        for k in 1..7 {
            let c = CostMatrix::from_row_major(k, vec![0.0; k * k]).unwrap();
            assert!(hungarian(&c).unwrap().is_identity());
        }
    }

    #[test]
    fn two_by_two() {
        let c = CostMatrix::new(vec![vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        let p = hungarian(&c).unwrap();
        assert!(p.is_identity());
        assert_eq!(c.total(&p), 2.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(CostMatrix::new(vec![vec![1.0, f64::NAN], vec![0.0, 1.0]]).is_err());
        assert!(CostMatrix::new(vec![vec![1.0, 2.0], vec![0.0]]).is_err());
        let big = CostMatrix::from_row_major(65, vec![0.0; 65 * 65]).unwrap();
        assert!(hungarian(&big).is_err());
    }

    #[test]
    fn matches_exhaustive_search_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..100 {
            let k = 7;
            let data: Vec<f64> = (0..k * k).map(|_| rng.random::<f64>() * 10.0).collect();
            let c = CostMatrix::from_row_major(k, data).unwrap();
            let (bp, bt) = brute_force(&c);
            let p = hungarian(&c).unwrap();
            assert_eq!(c.total(&p), bt);
            assert_eq!(p, bp);
        }
    }

    #[test]
    fn integer_ties_resolve_lexicographically() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..300 {
            let k = rng.random_range(2..=6);
            let data: Vec<f64> = (0..k * k).map(|_| rng.random_range(0..3) as f64).collect();
            let c = CostMatrix::from_row_major(k, data).unwrap();
            let (bp, bt) = brute_force(&c);
            let p = hungarian(&c).unwrap();
            assert_eq!(c.total(&p), bt);
            assert_eq!(p, bp, "cost {c:?}");
        }
    }

    #[test]
    fn scores_are_maximised() {
        let c = CostMatrix::from_scores(2, &[0.0, 5.0, 5.0, 0.0]).unwrap();
        assert_eq!(hungarian(&c).unwrap().as_slice(), &[1, 0]);
    }
}
