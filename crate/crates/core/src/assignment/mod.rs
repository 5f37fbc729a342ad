//! Minimum-cost perfect matching between two equal-size point sets.
//!
//! [`solve_exact`] returns the optimal permutation together with shadow prices
//! `a(i)` (left points) and `b(j)` (right points) satisfying
//! `b(j) - a(i) <= c(i, j)` for every pair, with equality on matched pairs.
//! Prices are shifted so that the smallest of all `2n` values is zero.

mod lapjv;
mod sparse;

use serde::{Deserialize, Serialize};

pub use lapjv::{solve as solve_matrix, CostMatrix, DenseCost, LapSolution};

use crate::error::{Error, Result};
use crate::geometry::{Metric, Point2, PointSet};

/// Above this size the dense solver evaluates cost entries on demand instead of storing them.
pub const DENSE_LIMIT: usize = 1024;
/// From this size on `solve_exact` works on a candidate graph (see [`Strategy`]).
pub const SPARSE_FROM: usize = 96;
/// Nearest neighbours per point in the candidate graph.
pub const CANDIDATE_NEIGHBOURS: usize = 12;
pub const BRUTE_FORCE_LIMIT: usize = 9;
pub const FEASIBILITY_TOL: f64 = 1e-9;
pub const SWAP_GAIN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    /// `permutation[i]` is the right index matched to left point `i`.
    pub permutation: Vec<usize>,
    pub total_cost: f64,
    pub duals_a: Vec<f64>,
    pub duals_b: Vec<f64>,
    pub optimal: bool,
    pub metric: Metric,
}

impl Matching {
    pub fn len(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutation.is_empty()
    }

    pub fn has_duals(&self) -> bool {
        !self.duals_a.is_empty() && self.duals_a.len() == self.duals_b.len()
    }

    /// Builds a dual-free matching from a permutation, validating bijectivity.
    pub fn from_permutation(left: &PointSet, right: &PointSet, permutation: Vec<usize>) -> Result<Self> {
        let metric = check_pair(left, right)?;
        check_bijection(&permutation, left.len())?;
        let total_cost = matched_cost(left.points(), right.points(), &permutation, metric);
        Ok(Self { permutation, total_cost, duals_a: vec![], duals_b: vec![], optimal: false, metric })
    }

    /// JSON object `{n, metric, total_cost, permutation, duals_a, duals_b}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "n": self.len(),
            "metric": self.metric.name(),
            "total_cost": round_sig(self.total_cost, 12),
            "permutation": self.permutation,
            "duals_a": self.duals_a,
            "duals_b": self.duals_b,
        })
    }
}

/// Rounds to `digits` significant digits.
pub fn round_sig(v: f64, digits: usize) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{:.*e}", digits.saturating_sub(1), v).parse().unwrap_or(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualReport {
    pub feasible: bool,
    /// Largest `b(j) - a(i) - c(i,j)` over all pairs, floored at zero.
    pub max_violation: f64,
    /// Largest `|c(i,π(i)) - (b(π(i)) - a(i))|` over matched pairs.
    pub slack_on_matched: f64,
}

fn check_pair(left: &PointSet, right: &PointSet) -> Result<Metric> {
    if left.is_empty() {
        return Err(Error::EmptyInput("matching needs at least one point"));
    }
    if left.len() != right.len() {
        return Err(Error::InvalidInput(format!(
            "size mismatch: {} left vs {} right points",
            left.len(),
            right.len()
        )));
    }
    if left.metric() != right.metric() {
        return Err(Error::InvalidInput("left and right point sets use different metrics".into()));
    }
    Ok(left.metric())
}

fn check_bijection(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::InvalidInput(format!("permutation length {} != {n}", perm.len())));
    }
    let mut seen = vec![false; n];
    for &j in perm {
        if j >= n || std::mem::replace(&mut seen[j], true) {
            return Err(Error::InvalidInput("permutation is not a bijection".into()));
        }
    }
    Ok(())
}

/// Σᵢ c(i, π(i)), summed in index order.
pub fn matched_cost(left: &[Point2], right: &[Point2], perm: &[usize], metric: Metric) -> f64 {
    left.iter().zip(perm).map(|(&a, &j)| metric.eval(a, right[j])).sum()
}

struct PointCost<'a> {
    left: &'a [Point2],
    right: &'a [Point2],
    metric: Metric,
}

impl CostMatrix for PointCost<'_> {
    #[inline(always)]
    fn dim(&self) -> usize {
        self.left.len()
    }

    #[inline(always)]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.metric.eval(self.left[i], self.right[j])
    }
}

/// How `solve_exact_with` reaches the optimum. Both certify it with the same duals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Dense by size: `Dense` below [`SPARSE_FROM`], `Candidates` from there on.
    Auto,
    /// Jonker–Volgenant on the full cost matrix (stored up to [`DENSE_LIMIT`], lazy beyond).
    Dense,
    /// Augmenting paths on a nearest-neighbour candidate graph, repaired
    /// against all n² dual constraints until they hold everywhere.
    Candidates,
}

pub fn solve_exact(left: &PointSet, right: &PointSet) -> Result<Matching> {
    solve_exact_with(left, right, Strategy::Auto)
}

pub fn solve_exact_with(left: &PointSet, right: &PointSet, strategy: Strategy) -> Result<Matching> {
    let metric = check_pair(left, right)?;
    let (lp, rp) = (left.points(), right.points());
    let n = lp.len();
    let dense = || {
        if n <= DENSE_LIMIT {
            lapjv::solve(&DenseCost::from_fn(n, |i, j| metric.eval(lp[i], rp[j])))
        } else {
            lapjv::solve(&PointCost { left: lp, right: rp, metric })
        }
    };
    let sol = match strategy {
        Strategy::Dense => dense(),
        Strategy::Auto if n < SPARSE_FROM => dense(),
        Strategy::Auto | Strategy::Candidates => {
            sparse::solve(lp, rp, metric, CANDIDATE_NEIGHBOURS).unwrap_or_else(dense)
        }
    };

    // u(i) + v(j) <= c(i,j)  ⇔  b(j) - a(i) <= c(i,j) with a = -u, b = v
    let mut duals_a: Vec<f64> = sol.u.iter().map(|u| -u).collect();
    let mut duals_b = sol.v;
    let shift = duals_a.iter().chain(&duals_b).copied().fold(f64::INFINITY, f64::min);
    duals_a.iter_mut().for_each(|a| *a -= shift);
    duals_b.iter_mut().for_each(|b| *b -= shift);

    let total_cost = matched_cost(lp, rp, &sol.row_to_col, metric);
    Ok(Matching { permutation: sol.row_to_col, total_cost, duals_a, duals_b, optimal: true, metric })
}

/// Exhaustive search over all n! permutations; test oracle for `solve_exact`.
pub fn brute_force(left: &PointSet, right: &PointSet) -> Result<Matching> {
    let metric = check_pair(left, right)?;
    let n = left.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge(n));
    }
    let (lp, rp) = (left.points(), right.points());
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_cost = matched_cost(lp, rp, &perm, metric);
    while next_permutation(&mut perm) {
        let c = matched_cost(lp, rp, &perm, metric);
        if c < best_cost {
            best_cost = c;
            best.copy_from_slice(&perm);
        }
    }
    Ok(Matching { permutation: best, total_cost: best_cost, duals_a: vec![], duals_b: vec![], optimal: true, metric })
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Two-couple local search: swap partners of `(i, i')` while that lowers the cost.
///
/// The returned matching admits no improving two-couple exchange. Duals are
/// kept only when no swap was made.
pub fn improve_two_swap(left: &PointSet, right: &PointSet, m: &Matching) -> Result<Matching> {
    let metric = check_pair(left, right)?;
    check_bijection(&m.permutation, left.len())?;
    let (lp, rp) = (left.points(), right.points());
    let n = lp.len();
    let mut perm = m.permutation.clone();
    let mut current: Vec<f64> = (0..n).map(|i| metric.eval(lp[i], rp[perm[i]])).collect();

    let mut swapped_any = false;
    loop {
        let mut improved = false;
        for i in 0..n {
            let a = lp[i];
            for k in i + 1..n {
                let (ji, jk) = (perm[i], perm[k]);
                let ci = metric.eval(a, rp[jk]);
                let ck = metric.eval(lp[k], rp[ji]);
                if ci + ck - current[i] - current[k] < -SWAP_GAIN_TOL {
                    perm.swap(i, k);
                    current[i] = ci;
                    current[k] = ck;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
        swapped_any = true;
    }

    if !swapped_any {
        return Ok(m.clone());
    }
    let total_cost = matched_cost(lp, rp, &perm, metric);
    Ok(Matching { permutation: perm, total_cost, duals_a: vec![], duals_b: vec![], optimal: false, metric })
}

/// Checks all n² dual constraints and the n matched equalities.
pub fn verify_duals(left: &PointSet, right: &PointSet, m: &Matching) -> Result<DualReport> {
    let metric = check_pair(left, right)?;
    let n = left.len();
    if m.duals_a.len() != n || m.duals_b.len() != n {
        return Err(Error::InvalidInput("matching carries no dual prices".into()));
    }
    check_bijection(&m.permutation, n)?;
    let (lp, rp) = (left.points(), right.points());
    let mut max_violation = 0.0f64;
    for (i, &a) in lp.iter().enumerate() {
        for (j, &b) in rp.iter().enumerate() {
            let excess = m.duals_b[j] - m.duals_a[i] - metric.eval(a, b);
            max_violation = max_violation.max(excess);
        }
    }
    let slack_on_matched = (0..n)
        .map(|i| {
            let j = m.permutation[i];
            (metric.eval(lp[i], rp[j]) - (m.duals_b[j] - m.duals_a[i])).abs()
        })
        .fold(0.0, f64::max);
    Ok(DualReport { feasible: max_violation <= FEASIBILITY_TOL, max_violation, slack_on_matched })
}

#[cfg(test)]
mod tests;
