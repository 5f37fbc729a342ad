//! Jonker–Volgenant shortest augmenting path assignment on a square cost matrix.
//!
//! Three phases: column reduction with reduction transfer, two rounds of
//! augmenting row reduction, then Dijkstra-style augmentation for the rows
//! still free. Column prices `v` are maintained throughout; row prices are
//! recovered at the end as `u[i] = c[i][x[i]] - v[x[i]]`, which makes
//! `u[i] + v[j] <= c[i][j]` with equality on the assignment.

const NONE: usize = usize::MAX;

/// Read access to an n×n cost matrix.
pub trait CostMatrix {
    fn dim(&self) -> usize;
    fn at(&self, i: usize, j: usize) -> f64;
}

/// Row-major dense matrix.
#[derive(Debug, Clone)]
pub struct DenseCost {
    n: usize,
    data: Vec<f64>,
}

impl DenseCost {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "cost matrix must be square");
        Self { n, data: rows.concat() }
    }
}

impl CostMatrix for DenseCost {
    #[inline(always)]
    fn dim(&self) -> usize {
        self.n
    }

    #[inline(always)]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

#[derive(Debug, Clone)]
pub struct LapSolution {
    pub row_to_col: Vec<usize>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// Minimum-cost assignment of rows to columns for an arbitrary square cost matrix.
///
/// `u` and `v` satisfy `u[i] + v[j] <= c(i, j)` with equality on `(i, row_to_col[i])`.
pub fn solve<C: CostMatrix>(c: &C) -> LapSolution {
    let n = c.dim();
    if n == 0 {
        return LapSolution { row_to_col: vec![], u: vec![], v: vec![] };
    }
    if n == 1 {
        return LapSolution { row_to_col: vec![0], u: vec![0.0], v: vec![c.at(0, 0)] };
    }

    let mut x = vec![NONE; n];
    let mut y = vec![NONE; n];
    let mut v = vec![f64::INFINITY; n];

    let mut free = column_reduction(c, &mut x, &mut y, &mut v);
    for _ in 0..2 {
        if free.is_empty() {
            break;
        }
        augmenting_row_reduction(c, &mut free, &mut x, &mut y, &mut v);
    }
    augment(c, &free, &mut x, &mut y, &mut v);

    let u = (0..n).map(|i| c.at(i, x[i]) - v[x[i]]).collect();
    LapSolution { row_to_col: x, u, v }
}

fn column_reduction<C: CostMatrix>(c: &C, x: &mut [usize], y: &mut [usize], v: &mut [f64]) -> Vec<usize> {
    let n = c.dim();
    for i in 0..n {
        for j in 0..n {
            let cij = c.at(i, j);
            if cij < v[j] {
                v[j] = cij;
                y[j] = i;
            }
        }
    }

    let mut unique = vec![true; n];
    for j in (0..n).rev() {
        let i = y[j];
        if x[i] == NONE {
            x[i] = j;
        } else {
            unique[i] = false;
            y[j] = NONE;
        }
    }

    let mut free = Vec::new();
    for i in 0..n {
        if x[i] == NONE {
            free.push(i);
        } else if unique[i] {
            // reduction transfer
            let j = x[i];
            let mut min = f64::INFINITY;
            for j2 in 0..n {
                if j2 != j {
                    let r = c.at(i, j2) - v[j2];
                    if r < min {
                        min = r;
                    }
                }
            }
            v[j] -= min;
        }
    }
    free
}

fn augmenting_row_reduction<C: CostMatrix>(
    c: &C,
    free: &mut Vec<usize>,
    x: &mut [usize],
    y: &mut [usize],
    v: &mut [f64],
) {
    let n = c.dim();
    let n_free = free.len();
    let mut current = 0;
    let mut new_free = 0;
    let mut rr_cnt = 0usize;

    while current < n_free {
        rr_cnt += 1;
        let free_i = free[current];
        current += 1;

        let mut j1 = 0;
        let mut v1 = c.at(free_i, 0) - v[0];
        let mut j2 = NONE;
        let mut v2 = f64::INFINITY;
        for j in 1..n {
            let r = c.at(free_i, j) - v[j];
            if r < v2 {
                if r >= v1 {
                    v2 = r;
                    j2 = j;
                } else {
                    v2 = v1;
                    v1 = r;
                    j2 = j1;
                    j1 = j;
                }
            }
        }

        let mut i0 = y[j1];
        let v1_new = v[j1] - (v2 - v1);
        let v1_lowers = v1_new < v[j1];
        if rr_cnt < current * n {
            if v1_lowers {
                v[j1] = v1_new;
            } else if i0 != NONE && j2 != NONE {
                j1 = j2;
                i0 = y[j2];
            }
            if i0 != NONE {
                if v1_lowers {
                    current -= 1;
                    free[current] = i0;
                } else {
                    free[new_free] = i0;
                    new_free += 1;
                }
            }
        } else if i0 != NONE {
            free[new_free] = i0;
            new_free += 1;
        }
        x[free_i] = j1;
        y[j1] = free_i;
    }
    free.truncate(new_free);
}

fn augment<C: CostMatrix>(c: &C, free: &[usize], x: &mut [usize], y: &mut [usize], v: &mut [f64]) {
    let n = c.dim();
    let mut pred = vec![0usize; n];
    let mut cols = vec![0usize; n];
    let mut d = vec![0.0f64; n];
    for &free_i in free {
        let mut j = find_path(c, free_i, y, v, &mut pred, &mut cols, &mut d);
        loop {
            let i = pred[j];
            y[j] = i;
            std::mem::swap(&mut j, &mut x[i]);
            if i == free_i {
                break;
            }
        }
    }
}

fn find_path<C: CostMatrix>(
    c: &C,
    start_i: usize,
    y: &[usize],
    v: &mut [f64],
    pred: &mut [usize],
    cols: &mut [usize],
    d: &mut [f64],
) -> usize {
    let n = c.dim();
    let mut lo = 0;
    let mut hi = 0;
    let mut n_ready = 0;
    let mut final_j = NONE;

    for j in 0..n {
        cols[j] = j;
        pred[j] = start_i;
        d[j] = c.at(start_i, j) - v[j];
    }

    while final_j == NONE {
        if lo == hi {
            n_ready = lo;
            hi = find_min_group(lo, d, cols);
            if let Some(&j) = cols[lo..hi].iter().find(|&&j| y[j] == NONE) {
                final_j = j;
            }
        }
        if final_j == NONE {
            final_j = scan(c, &mut lo, &mut hi, d, cols, pred, y, v);
        }
    }

    let mind = d[final_j];
    for &j in &cols[..n_ready] {
        v[j] += d[j] - mind;
    }
    final_j
}

/// Moves every column with the smallest tentative distance into `cols[lo..hi]`.
fn find_min_group(lo: usize, d: &[f64], cols: &mut [usize]) -> usize {
    let n = cols.len();
    let mut hi = lo + 1;
    let mut mind = d[cols[lo]];
    for k in hi..n {
        let j = cols[k];
        if d[j] <= mind {
            if d[j] < mind {
                hi = lo;
                mind = d[j];
            }
            cols[k] = cols[hi];
            cols[hi] = j;
            hi += 1;
        }
    }
    hi
}

#[allow(clippy::too_many_arguments)]
fn scan<C: CostMatrix>(
    c: &C,
    lo: &mut usize,
    hi: &mut usize,
    d: &mut [f64],
    cols: &mut [usize],
    pred: &mut [usize],
    y: &[usize],
    v: &[f64],
) -> usize {
    let n = c.dim();
    while *lo != *hi {
        let j = cols[*lo];
        *lo += 1;
        let i = y[j];
        let mind = d[j];
        let h = c.at(i, j) - v[j] - mind;
        for k in *hi..n {
            let j = cols[k];
            // reduced costs are nonnegative in exact arithmetic; clamp rounding
            let cred = (c.at(i, j) - v[j] - h).max(mind);
            if cred < d[j] {
                d[j] = cred;
                pred[j] = i;
                if cred == mind {
                    if y[j] == NONE {
                        return j;
                    }
                    cols[k] = cols[*hi];
                    cols[*hi] = j;
                    *hi += 1;
                }
            }
        }
    }
    NONE
}
