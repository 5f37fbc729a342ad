//! Planar point sets, sampling and the squared-distance costs used by every matcher.

use std::io::{Read, Write};
use std::ops::{Add, Sub};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn norm_sq(&self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn in_unit_square(&self) -> bool {
        (0.0..1.0).contains(&self.x) && (0.0..1.0).contains(&self.y)
    }

    pub fn coord(&self, axis: usize) -> f64 {
        if axis == 0 {
            self.x
        } else {
            self.y
        }
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Squared Euclidean distance in the plane.
    #[default]
    EuclideanSquared,
    /// Squared distance on the unit torus (opposite edges of [0,1)² identified).
    ToroidalSquared,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::EuclideanSquared => "plane",
            Metric::ToroidalSquared => "torus",
        }
    }

    /// Unchecked cost; callers guarantee torus coordinates lie in [0,1).
    #[inline(always)]
    pub fn eval(self, a: Point2, b: Point2) -> f64 {
        match self {
            Metric::EuclideanSquared => {
                let dx = a.x - b.x;
                let dy = a.y - b.y;
                dx * dx + dy * dy
            }
            Metric::ToroidalSquared => {
                let dx = wrap(a.x - b.x);
                let dy = wrap(a.y - b.y);
                dx * dx + dy * dy
            }
        }
    }
}

#[inline(always)]
fn wrap(delta: f64) -> f64 {
    let d = delta.abs();
    d.min(1.0 - d)
}

impl std::str::FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plane" | "euclidean" | "euclidean_squared" => Ok(Metric::EuclideanSquared),
            "torus" | "toroidal" | "toroidal_squared" => Ok(Metric::ToroidalSquared),
            other => Err(Error::InvalidInput(format!("unknown metric {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    UniformSquare,
    StandardNormalPlane,
}

impl SampleKind {
    pub fn name(&self) -> &'static str {
        match self {
            SampleKind::UniformSquare => "uniform",
            SampleKind::StandardNormalPlane => "normal",
        }
    }
}

/// Checked cost between two points.
pub fn cost(a: Point2, b: Point2, metric: Metric) -> Result<f64> {
    if metric == Metric::ToroidalSquared && !(a.in_unit_square() && b.in_unit_square()) {
        return Err(Error::Domain(format!(
            "toroidal cost needs points in [0,1)^2, got {a:?} and {b:?}"
        )));
    }
    Ok(metric.eval(a, b))
}

/// |(a+b)−(c+d)|² minus its expansion into the six pairwise squared distances.
///
/// Evaluated in double-double arithmetic: the terms reach 10⁷ for coordinates
/// of magnitude 10³, where plain f64 would leave residuals near 10⁻⁸.
pub fn euclidean_identity_residual(a: Point2, b: Point2, c: Point2, d: Point2) -> f64 {
    let mut total = Dd::ZERO;
    for axis in 0..2 {
        let (a, b, c, d) = (a.coord(axis), b.coord(axis), c.coord(axis), d.coord(axis));
        let lhs = Dd::sum(a, b).sub(Dd::sum(c, d)).square();
        let sq = |p: f64, q: f64| Dd::sum(p, -q).square();
        let rhs = sq(a, c)
            .add(sq(a, d))
            .add(sq(b, c))
            .add(sq(b, d))
            .sub(sq(a, b))
            .sub(sq(c, d));
        total = total.add(lhs.sub(rhs));
    }
    total.hi + total.lo
}

#[derive(Debug, Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    fn two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        let bb = s - a;
        let e = (a - (s - bb)) + (b - bb);
        Dd { hi: s, lo: e }
    }

    fn sum(a: f64, b: f64) -> Dd {
        Self::two_sum(a, b)
    }

    fn add(self, o: Dd) -> Dd {
        let s = Self::two_sum(self.hi, o.hi);
        let lo = s.lo + self.lo + o.lo;
        Self::two_sum(s.hi, lo)
    }

    fn sub(self, o: Dd) -> Dd {
        self.add(Dd { hi: -o.hi, lo: -o.lo })
    }

    fn square(self) -> Dd {
        let p = self.hi * self.hi;
        let e = self.hi.mul_add(self.hi, -p);
        let lo = e + 2.0 * self.hi * self.lo + self.lo * self.lo;
        Self::two_sum(p, lo)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuantileDirection {
    NormalToUniform,
    UniformToNormal,
}

/// An indexed point collection; the index order is the identity used by matchings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    points: Vec<Point2>,
    metric: Metric,
}

impl PointSet {
    pub fn new(points: Vec<Point2>, metric: Metric) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| !p.is_finite()) {
            return Err(Error::Domain(format!("non-finite coordinate in {p:?}")));
        }
        if metric == Metric::ToroidalSquared {
            if let Some(p) = points.iter().find(|p| !p.in_unit_square()) {
                return Err(Error::Domain(format!("toroidal point outside [0,1)^2: {p:?}")));
            }
        }
        Ok(Self { points, metric })
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point2> {
        self.points
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Same points under another metric.
    pub fn with_metric(&self, metric: Metric) -> Result<Self> {
        Self::new(self.points.clone(), metric)
    }

    /// Concatenation `self ∪ other`, preserving index order.
    pub fn union(&self, other: &PointSet) -> Result<Self> {
        if self.metric != other.metric {
            return Err(Error::InvalidInput("union of point sets with different metrics".into()));
        }
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        Ok(Self { points, metric: self.metric })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["idx", "x", "y"])?;
        for (i, p) in self.points.iter().enumerate() {
            wtr.write_record([i.to_string(), fmt17(p.x), fmt17(p.y)])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, metric: Metric) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            idx: usize,
            x: f64,
            y: f64,
        }
        let mut rdr = csv::Reader::from_reader(r);
        let mut points = Vec::new();
        for (expected, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row?;
            if row.idx != expected {
                return Err(Error::InvalidInput(format!(
                    "csv idx {} out of order (expected {expected})",
                    row.idx
                )));
            }
            points.push(Point2::new(row.x, row.y));
        }
        Self::new(points, metric)
    }

    /// JSON list of `[x, y]` pairs.
    pub fn to_json(&self) -> String {
        let pairs: Vec<[f64; 2]> = self.points.iter().map(|p| [p.x, p.y]).collect();
        serde_json::to_string(&pairs).expect("finite floats serialize")
    }

    pub fn from_json(s: &str, metric: Metric) -> Result<Self> {
        let pairs: Vec<[f64; 2]> = serde_json::from_str(s)?;
        Self::new(pairs.into_iter().map(|[x, y]| Point2::new(x, y)).collect(), metric)
    }
}

/// 17 significant digits; enough to round-trip any f64.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Draws `n` i.i.d. points.
pub fn sample<R: Rng + ?Sized>(kind: SampleKind, n: usize, rng: &mut R) -> Result<PointSet> {
    if n == 0 {
        return Err(Error::EmptyInput("sample size must be positive"));
    }
    let points = (0..n).map(|_| sample_point(kind, rng)).collect();
    // uniform points may be used on the torus, normal ones never
    let metric = Metric::EuclideanSquared;
    Ok(PointSet { points, metric })
}

/// Uniform points on the unit square under the given metric.
pub fn sample_uniform<R: Rng + ?Sized>(n: usize, metric: Metric, rng: &mut R) -> Result<PointSet> {
    sample(SampleKind::UniformSquare, n, rng)?.with_metric(metric)
}

fn sample_point<R: Rng + ?Sized>(kind: SampleKind, rng: &mut R) -> Point2 {
    match kind {
        SampleKind::UniformSquare => Point2::new(rng.random::<f64>(), rng.random::<f64>()),
        SampleKind::StandardNormalPlane => {
            Point2::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        }
    }
}

/// Coordinate-wise Φ or Φ⁻¹. Both are strictly monotone, so per-axis ranks survive.
pub fn marginal_quantile_transform(ps: &PointSet, direction: QuantileDirection) -> Result<PointSet> {
    let points = match direction {
        QuantileDirection::NormalToUniform => ps
            .points
            .iter()
            .map(|p| Point2::new(normal::cdf(p.x), normal::cdf(p.y)))
            .collect::<Vec<_>>(),
        QuantileDirection::UniformToNormal => {
            let open = |v: f64| v > 0.0 && v < 1.0;
            if let Some(p) = ps.points.iter().find(|p| !(open(p.x) && open(p.y))) {
                return Err(Error::Domain(format!(
                    "uniform-to-normal needs coordinates in (0,1), got {p:?}"
                )));
            }
            ps.points
                .iter()
                .map(|p| Point2::new(normal::quantile(p.x), normal::quantile(p.y)))
                .collect()
        }
    };
    // Φ can round to exactly 1.0 for x > ~8.3, which is outside [0,1) for the torus.
    Ok(PointSet { points, metric: Metric::EuclideanSquared })
}
