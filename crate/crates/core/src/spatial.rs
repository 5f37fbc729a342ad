//! Uniform bucket grid for nearest-neighbour queries in the plane or on the
//! unit torus.
//!
//! Queries walk square rings of cells outward from the query cell. After ring
//! `r` every unvisited point is at least `r` cell widths away, which bounds
//! the search exactly.

use crate::geometry::{Metric, Point2};

#[derive(Debug, Clone)]
pub struct Grid {
    points: Vec<Point2>,
    metric: Metric,
    side: usize,
    origin: Point2,
    cell: f64,
    starts: Vec<usize>,
    items: Vec<usize>,
}

impl Grid {
    /// Buckets `points` into roughly `n / per_cell` square cells.
    pub fn new(points: &[Point2], metric: Metric, per_cell: f64) -> Self {
        let n = points.len().max(1);
        let side = ((n as f64 / per_cell).sqrt().ceil() as usize).clamp(1, 4096);
        let (origin, extent) = match metric {
            Metric::ToroidalSquared => (Point2::new(0.0, 0.0), 1.0),
            Metric::EuclideanSquared => {
                let (mut lo, mut hi) = (Point2::new(f64::INFINITY, f64::INFINITY), Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
                for p in points {
                    lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
                    hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
                }
                if points.is_empty() {
                    (Point2::new(0.0, 0.0), 1.0)
                } else {
                    let ext = (hi.x - lo.x).max(hi.y - lo.y).max(f64::MIN_POSITIVE);
                    (lo, ext * (1.0 + 1e-9))
                }
            }
        };
        let cell = extent / side as f64;

        let mut grid = Self { points: points.to_vec(), metric, side, origin, cell, starts: vec![], items: vec![] };
        let cells: Vec<usize> = points.iter().map(|&p| grid.cell_of(p)).collect();
        let mut counts = vec![0usize; side * side + 1];
        for &c in &cells {
            counts[c + 1] += 1;
        }
        for c in 0..side * side {
            counts[c + 1] += counts[c];
        }
        let mut fill = counts.clone();
        let mut items = vec![0usize; points.len()];
        for (i, &c) in cells.iter().enumerate() {
            items[fill[c]] = i;
            fill[c] += 1;
        }
        grid.starts = counts;
        grid.items = items;
        grid
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    fn axis_cell(&self, v: f64, origin: f64) -> isize {
        let c = ((v - origin) / self.cell).floor() as isize;
        match self.metric {
            Metric::ToroidalSquared => c.rem_euclid(self.side as isize),
            Metric::EuclideanSquared => c.clamp(0, self.side as isize - 1),
        }
    }

    fn cell_of(&self, p: Point2) -> usize {
        let cx = self.axis_cell(p.x, self.origin.x) as usize;
        let cy = self.axis_cell(p.y, self.origin.y) as usize;
        cy * self.side + cx
    }

    /// Visits every point in the cells at Chebyshev ring distance `r` from `(cx, cy)`.
    fn visit_ring(&self, cx: isize, cy: isize, r: isize, mut f: impl FnMut(usize)) {
        let side = self.side as isize;
        let mut visit_cell = |x: isize, y: isize| {
            let (x, y) = match self.metric {
                Metric::ToroidalSquared => (x.rem_euclid(side), y.rem_euclid(side)),
                Metric::EuclideanSquared => {
                    if x < 0 || y < 0 || x >= side || y >= side {
                        return;
                    }
                    (x, y)
                }
            };
            let c = (y * side + x) as usize;
            for &i in &self.items[self.starts[c]..self.starts[c + 1]] {
                f(i);
            }
        };
        if r == 0 {
            visit_cell(cx, cy);
            return;
        }
        for x in cx - r..=cx + r {
            visit_cell(x, cy - r);
            visit_cell(x, cy + r);
        }
        for y in cy - r + 1..cy + r {
            visit_cell(cx - r, y);
            visit_cell(cx + r, y);
        }
    }

    /// Torus only: visits every cell whose wrapped offset from `(cx, cy)`
    /// reaches `r` on some axis, i.e. all cells outside the block of radius `r - 1`.
    fn visit_outside_block(&self, cx: isize, cy: isize, r: isize, mut f: impl FnMut(usize)) {
        let side = self.side as isize;
        let wrapped = |d: isize| {
            let d = d.rem_euclid(side);
            d.min(side - d)
        };
        for y in 0..side {
            for x in 0..side {
                if wrapped(x - cx).max(wrapped(y - cy)) >= r {
                    let c = (y * side + x) as usize;
                    for &i in &self.items[self.starts[c]..self.starts[c + 1]] {
                        f(i);
                    }
                }
            }
        }
    }

    /// The `k` nearest points to `q` as `(cost, index)`, sorted by cost then index.
    pub fn k_nearest(&self, q: Point2, k: usize, out: &mut Vec<(f64, usize)>) {
        out.clear();
        if self.points.is_empty() || k == 0 {
            return;
        }
        let side = self.side as isize;
        let cx = self.axis_cell(q.x, self.origin.x);
        let cy = self.axis_cell(q.y, self.origin.y);
        let plane_reach = cx.max(side - 1 - cx).max(cy).max(side - 1 - cy);
        let push = |out: &mut Vec<(f64, usize)>, i: usize| out.push((self.metric.eval(q, self.points[i]), i));

        let mut r = 0;
        loop {
            let torus = self.metric == Metric::ToroidalSquared;
            if torus && 2 * r + 1 > side {
                // the block of radius r wraps onto itself; finish in one sweep
                self.visit_outside_block(cx, cy, r, |i| push(out, i));
                break;
            }
            self.visit_ring(cx, cy, r, |i| push(out, i));
            if out.len() >= k {
                out.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                out.truncate(k);
                let kth = out.iter().map(|e| e.0).fold(0.0, f64::max);
                let reach = r as f64 * self.cell;
                if kth < reach * reach {
                    break;
                }
            }
            if (torus && 2 * r + 1 == side) || (!torus && r >= plane_reach) {
                break;
            }
            r += 1;
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out.truncate(k);
    }

    /// Exact nearest point to `q`; ties go to the lower index.
    pub fn nearest(&self, q: Point2) -> Option<(usize, f64)> {
        let mut buf = Vec::with_capacity(8);
        self.k_nearest(q, 1, &mut buf);
        buf.first().map(|&(d, i)| (i, d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sample, SampleKind};
    use crate::rng::{stream, Purpose};

    fn brute(points: &[Point2], q: Point2, k: usize, metric: Metric) -> Vec<(f64, usize)> {
        let mut all: Vec<(f64, usize)> = points.iter().enumerate().map(|(i, &p)| (metric.eval(q, p), i)).collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all.truncate(k);
        all
    }

    #[test]
    fn knn_matches_brute_force() {
        for (metric, kind) in [
            (Metric::ToroidalSquared, SampleKind::UniformSquare),
            (Metric::EuclideanSquared, SampleKind::UniformSquare),
            (Metric::EuclideanSquared, SampleKind::StandardNormalPlane),
        ] {
            for (seed, n) in [(1u64, 1usize), (2, 7), (3, 100), (4, 1000)] {
                let mut rng = stream(seed, Purpose::Misc, 0);
                let pts = sample(kind, n, &mut rng).unwrap().into_points();
                let queries = sample(kind, 50, &mut rng).unwrap().into_points();
                for per_cell in [0.5, 2.0, 8.0] {
                    let grid = Grid::new(&pts, metric, per_cell);
                    let mut out = Vec::new();
                    for &q in &queries {
                        for k in [1, 5, 20] {
                            grid.k_nearest(q, k, &mut out);
                            let want = brute(&pts, q, k, metric);
                            assert_eq!(out.len(), want.len());
                            for (a, b) in out.iter().zip(&want) {
                                assert_eq!(a.0, b.0, "{metric:?} n={n} k={k}");
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn nearest_wraps_on_torus() {
        let pts = vec![Point2::new(0.95, 0.5), Point2::new(0.3, 0.5)];
        let grid = Grid::new(&pts, Metric::ToroidalSquared, 1.0);
        assert_eq!(grid.nearest(Point2::new(0.02, 0.5)).unwrap().0, 0);
        let grid = Grid::new(&pts, Metric::EuclideanSquared, 1.0);
        assert_eq!(grid.nearest(Point2::new(0.02, 0.5)).unwrap().0, 1);
    }
}
