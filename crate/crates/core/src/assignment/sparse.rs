//! Shortest augmenting paths on a nearest-neighbour candidate graph, closed
//! by a full dual check.
//!
//! The candidate graph joins every left point to its nearest right points and
//! every right point to its nearest left points. Augmentation is the same
//! column-price Dijkstra as in the dense solver, restricted to candidate
//! edges. Afterwards every one of the n² pairs is checked against the row and
//! column prices; rows with a violated constraint receive the violating edges,
//! are released, and augmented again. The loop ends only when the prices are
//! feasible for the complete bipartite graph, so the result is a global
//! optimum with the same certificate the dense solver produces.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::lapjv::LapSolution;
use crate::geometry::{Metric, Point2};
use crate::spatial::Grid;

const NONE: usize = usize::MAX;
/// Violations smaller than this are left alone; they are far below the
/// 1e-9 certificate tolerance.
const REPAIR_TOL: f64 = 1e-13;
/// Most violated edges added to a row per repair round.
const EDGES_PER_REPAIR: usize = 8;

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    dist: f64,
    col: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.col.cmp(&self.col))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Solver<'a> {
    left: &'a [Point2],
    right: &'a [Point2],
    metric: Metric,
    adj: Vec<Vec<usize>>,
    x: Vec<usize>,
    y: Vec<usize>,
    v: Vec<f64>,
    // Dijkstra scratch
    d: Vec<f64>,
    pred: Vec<usize>,
    settled: Vec<bool>,
    touched: Vec<usize>,
    heap: BinaryHeap<Entry>,
}

impl<'a> Solver<'a> {
    #[inline(always)]
    fn cost(&self, i: usize, j: usize) -> f64 {
        self.metric.eval(self.left[i], self.right[j])
    }

    fn row_price(&self, i: usize) -> f64 {
        let j = self.x[i];
        self.cost(i, j) - self.v[j]
    }

    /// Augments from free row `start`. Returns false when the candidate graph
    /// offers no path to a free column.
    fn augment_row(&mut self, start: usize) -> bool {
        for k in 0..self.adj[start].len() {
            let j = self.adj[start][k];
            let dj = self.cost(start, j) - self.v[j];
            if dj < self.d[j] {
                if self.d[j] == f64::INFINITY {
                    self.touched.push(j);
                }
                self.d[j] = dj;
                self.pred[j] = start;
                self.heap.push(Entry { dist: dj, col: j });
            }
        }

        let mut final_j = NONE;
        let mut settled_cols = Vec::new();
        while let Some(Entry { dist, col: j }) = self.heap.pop() {
            if self.settled[j] || dist > self.d[j] {
                continue;
            }
            if self.y[j] == NONE {
                final_j = j;
                break;
            }
            self.settled[j] = true;
            settled_cols.push(j);
            let i = self.y[j];
            let ui = self.row_price(i);
            for k in 0..self.adj[i].len() {
                let j2 = self.adj[i][k];
                if self.settled[j2] {
                    continue;
                }
                // reduced cost is nonnegative in exact arithmetic
                let nd = dist + (self.cost(i, j2) - self.v[j2] - ui).max(0.0);
                if nd < self.d[j2] {
                    if self.d[j2] == f64::INFINITY {
                        self.touched.push(j2);
                    }
                    self.d[j2] = nd;
                    self.pred[j2] = i;
                    self.heap.push(Entry { dist: nd, col: j2 });
                }
            }
        }

        let found = final_j != NONE;
        if found {
            let mind = self.d[final_j];
            for &j in &settled_cols {
                self.v[j] += self.d[j] - mind;
            }
            let mut j = final_j;
            loop {
                let i = self.pred[j];
                self.y[j] = i;
                std::mem::swap(&mut j, &mut self.x[i]);
                if i == start {
                    break;
                }
            }
        }

        for &j in &settled_cols {
            self.settled[j] = false;
        }
        for &j in &self.touched {
            self.d[j] = f64::INFINITY;
        }
        self.touched.clear();
        self.heap.clear();
        found
    }

    fn release(&mut self, i: usize) {
        let j = self.x[i];
        if j != NONE {
            self.y[j] = NONE;
            self.x[i] = NONE;
        }
    }

    fn augment_all(&mut self, mut free: Vec<usize>) {
        let n = self.left.len();
        while let Some(i) = free.pop() {
            if !self.augment_row(i) {
                // no augmenting path in the candidate graph: connect the row to every column
                self.adj[i] = (0..n).collect();
                let ok = self.augment_row(i);
                debug_assert!(ok, "a fully connected row always reaches a free column");
            }
        }
    }

    /// Adds every violated edge; returns the rows that must be re-augmented.
    fn repair(&mut self) -> Vec<usize> {
        let n = self.left.len();
        let mut bad_rows = Vec::new();
        let mut viol: Vec<(f64, usize)> = Vec::new();
        for i in 0..n {
            let ui = self.row_price(i);
            let a = self.left[i];
            viol.clear();
            for j in 0..n {
                let r = self.metric.eval(a, self.right[j]) - self.v[j] - ui;
                if r < -REPAIR_TOL && j != self.x[i] {
                    viol.push((r, j));
                }
            }
            if viol.is_empty() {
                continue;
            }
            if viol.len() > EDGES_PER_REPAIR {
                viol.select_nth_unstable_by(EDGES_PER_REPAIR - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                viol.truncate(EDGES_PER_REPAIR);
            }
            for &(_, j) in &viol {
                if !self.adj[i].contains(&j) {
                    self.adj[i].push(j);
                }
            }
            bad_rows.push(i);
        }
        for &i in &bad_rows {
            self.release(i);
        }
        bad_rows
    }
}

/// Gives up (returns `None`) after this many repair rounds.
const MAX_REPAIR_ROUNDS: usize = 64;

pub(crate) fn solve(left: &[Point2], right: &[Point2], metric: Metric, neighbours: usize) -> Option<LapSolution> {
    let n = left.len();
    let k = neighbours.min(n);
    let mut adj: Vec<Vec<usize>> = vec![Vec::with_capacity(2 * k); n];
    let mut buf = Vec::with_capacity(k);

    let right_grid = Grid::new(right, metric, 2.0);
    for (i, &p) in left.iter().enumerate() {
        right_grid.k_nearest(p, k, &mut buf);
        adj[i].extend(buf.iter().map(|&(_, j)| j));
    }
    let left_grid = Grid::new(left, metric, 2.0);
    for (j, &p) in right.iter().enumerate() {
        left_grid.k_nearest(p, k, &mut buf);
        for &(_, i) in &buf {
            if !adj[i].contains(&j) {
                adj[i].push(j);
            }
        }
    }

    let mut s = Solver {
        left,
        right,
        metric,
        adj,
        x: vec![NONE; n],
        y: vec![NONE; n],
        v: vec![0.0; n],
        d: vec![f64::INFINITY; n],
        pred: vec![0; n],
        settled: vec![false; n],
        touched: Vec::new(),
        heap: BinaryHeap::new(),
    };

    // column reduction over candidate edges gives a tight starting price
    let mut vmin = vec![f64::INFINITY; n];
    for i in 0..n {
        for &j in &s.adj[i] {
            vmin[j] = vmin[j].min(s.cost(i, j));
        }
    }
    s.v = vmin.into_iter().map(|m| if m.is_finite() { m } else { 0.0 }).collect();

    s.augment_all((0..n).rev().collect());
    let mut rounds = 0;
    loop {
        let bad = s.repair();
        if bad.is_empty() {
            break;
        }
        rounds += 1;
        if rounds > MAX_REPAIR_ROUNDS {
            return None;
        }
        s.augment_all(bad);
    }

    let u = (0..n).map(|i| s.row_price(i)).collect();
    Some(LapSolution { row_to_col: s.x, u, v: s.v })
}
