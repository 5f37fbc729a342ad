//! Dual-price maps of one exact toroidal matching.
//!
//! Each pixel takes the normalized dual price of the kid nearest to its
//! centre on the torus: a(i) for a girl, b(j) for a boy. The image is a
//! binary PPM with a fixed 256-entry ramp from dark blue (price 0) to yellow
//! (the maximal price). Kids are drawn in the complement of their own ramp
//! colour, girls as discs and boys as squares. Couples whose shortest
//! toroidal connection stays inside the square are joined by a gray segment;
//! for the others the wife carries a white X instead.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::Provenance;
use crate::assignment::solve_exact;
use crate::error::{Error, Result};
use crate::geometry::{sample_uniform, Metric, Point2};
use crate::rng::{stream, Purpose};
use crate::spatial::Grid;

pub const MIN_RESOLUTION: usize = 64;

const SEGMENT: [u8; 3] = [150, 150, 150];
const CROSS: [u8; 3] = [255, 255, 255];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceMap {
    pub n: usize,
    pub seed: u64,
    pub resolution: usize,
    pub total_cost: f64,
    pub min_value: f64,
    pub max_value: f64,
    /// Row-major, top row first; row r covers y = 1 − (r + ½)/resolution.
    pub values: Vec<f64>,
    /// Pixel counts per equal-width price bucket over [0, max_value], for
    /// pixels whose nearest kid is a girl (wife) or a boy (husband).
    pub wife_counts: Vec<usize>,
    pub husband_counts: Vec<usize>,
    /// RGB bytes, row-major.
    #[serde(skip)]
    pub rgb: Vec<u8>,
}

/// Ramp entry `i`: linear from (0, 0, 128) to (255, 255, 0).
pub fn ramp(i: u8) -> [u8; 3] {
    let t = i as u32;
    [t as u8, t as u8, (128 * (255 - t) / 255) as u8]
}

fn ramp_index(v: f64, max: f64) -> u8 {
    if max <= 0.0 {
        return 0;
    }
    ((v / max).clamp(0.0, 1.0) * 255.0).round() as u8
}

fn complement(c: [u8; 3]) -> [u8; 3] {
    [255 - c[0], 255 - c[1], 255 - c[2]]
}

struct Canvas {
    res: usize,
    rgb: Vec<u8>,
}

impl Canvas {
    fn put(&mut self, col: isize, row: isize, c: [u8; 3]) {
        if col < 0 || row < 0 || col >= self.res as isize || row >= self.res as isize {
            return;
        }
        let at = 3 * (row as usize * self.res + col as usize);
        self.rgb[at..at + 3].copy_from_slice(&c);
    }

    fn pixel_of(&self, p: Point2) -> (isize, isize) {
        let r = self.res as f64;
        ((p.x * r).floor() as isize, ((1.0 - p.y) * r).floor() as isize)
    }

    fn line(&mut self, a: Point2, b: Point2, c: [u8; 3]) {
        let (x0, y0) = self.pixel_of(a);
        let (x1, y1) = self.pixel_of(b);
        let steps = (x1 - x0).abs().max((y1 - y0).abs()).max(1);
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            let x = x0 as f64 + t * (x1 - x0) as f64;
            let y = y0 as f64 + t * (y1 - y0) as f64;
            self.put(x.round() as isize, y.round() as isize, c);
        }
    }

    fn disc(&mut self, p: Point2, radius: isize, c: [u8; 3]) {
        let (cx, cy) = self.pixel_of(p);
        for dy in -radius..=radius {
            for dx in -radius..=radius {
                if dx * dx + dy * dy <= radius * radius {
                    self.put(cx + dx, cy + dy, c);
                }
            }
        }
    }

    fn square(&mut self, p: Point2, radius: isize, c: [u8; 3]) {
        let (cx, cy) = self.pixel_of(p);
        for dy in -radius..=radius {
            for dx in -radius..=radius {
                self.put(cx + dx, cy + dy, c);
            }
        }
    }

    fn cross(&mut self, p: Point2, radius: isize, c: [u8; 3]) {
        let (cx, cy) = self.pixel_of(p);
        for d in -radius..=radius {
            self.put(cx + d, cy + d, c);
            self.put(cx + d, cy - d, c);
        }
    }
}

/// Solves one seeded instance of `n` girls against `n` boys on the torus and
/// renders its price map.
pub fn render_price_map(n: usize, seed: u64, resolution: usize, buckets: usize) -> Result<PriceMap> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("price map needs n >= 2, got {n}")));
    }
    if resolution < MIN_RESOLUTION {
        return Err(Error::InvalidInput(format!("resolution must be at least {MIN_RESOLUTION}, got {resolution}")));
    }
    if buckets == 0 {
        return Err(Error::InvalidInput("buckets must be at least 1".into()));
    }
    let metric = Metric::ToroidalSquared;
    let mut rng = stream(seed, Purpose::PriceMap, n as u64);
    let girls = sample_uniform(n, metric, &mut rng)?;
    let boys = sample_uniform(n, metric, &mut rng)?;
    let m = solve_exact(&girls, &boys)?;

    // kids 0..n are girls, n..2n boys
    let kids: Vec<Point2> = girls.points().iter().chain(boys.points()).copied().collect();
    let prices: Vec<f64> = m.duals_a.iter().chain(&m.duals_b).copied().collect();
    let min_value = prices.iter().copied().fold(f64::INFINITY, f64::min);
    let prices: Vec<f64> = prices.iter().map(|p| p - min_value).collect();
    let max_value = prices.iter().copied().fold(0.0, f64::max);

    let grid = Grid::new(&kids, metric, 2.0);
    let mut values = Vec::with_capacity(resolution * resolution);
    let mut wife_counts = vec![0; buckets];
    let mut husband_counts = vec![0; buckets];
    let mut canvas = Canvas { res: resolution, rgb: vec![0; 3 * resolution * resolution] };
    let r = resolution as f64;
    for row in 0..resolution {
        for col in 0..resolution {
            let centre = Point2::new((col as f64 + 0.5) / r, 1.0 - (row as f64 + 0.5) / r);
            let (kid, _) = grid.nearest(centre).expect("kids are nonempty");
            let v = prices[kid];
            values.push(v);
            let bucket = if max_value > 0.0 { ((v / max_value * buckets as f64) as usize).min(buckets - 1) } else { 0 };
            if kid < n {
                wife_counts[bucket] += 1;
            } else {
                husband_counts[bucket] += 1;
            }
            canvas.put(col as isize, row as isize, ramp(ramp_index(v, max_value)));
        }
    }

    let radius = (resolution / 256).max(2) as isize;
    for (i, &j) in m.permutation.iter().enumerate() {
        let (g, b) = (kids[i], kids[n + j]);
        if (g.x - b.x).abs() <= 0.5 && (g.y - b.y).abs() <= 0.5 {
            canvas.line(g, b, SEGMENT);
        }
    }
    for (k, &p) in kids.iter().enumerate() {
        let colour = complement(ramp(ramp_index(prices[k], max_value)));
        if k < n {
            canvas.disc(p, radius, colour);
        } else {
            canvas.square(p, radius, colour);
        }
    }
    for (i, &j) in m.permutation.iter().enumerate() {
        let (g, b) = (kids[i], kids[n + j]);
        if !((g.x - b.x).abs() <= 0.5 && (g.y - b.y).abs() <= 0.5) {
            canvas.cross(g, radius + 1, CROSS);
        }
    }

    Ok(PriceMap {
        n,
        seed,
        resolution,
        total_cost: m.total_cost,
        min_value: 0.0,
        max_value,
        values,
        wife_counts,
        husband_counts,
        rgb: canvas.rgb,
    })
}

impl PriceMap {
    /// Binary PPM (P6) with the provenance as header comments.
    pub fn write_ppm<W: Write>(&self, mut w: W, prov: &Provenance) -> Result<()> {
        writeln!(w, "P6")?;
        writeln!(w, "# version: {}", prov.version)?;
        writeln!(w, "# seed: {}", prov.seed)?;
        writeln!(w, "# config: {}", prov.config_hash)?;
        writeln!(w, "{} {}", self.resolution, self.resolution)?;
        writeln!(w, "255")?;
        w.write_all(&self.rgb)?;
        Ok(())
    }

    /// Sidecar with the summary statistics (pixel values are omitted).
    pub fn sidecar_json(&self, prov: &Provenance) -> serde_json::Value {
        serde_json::json!({
            "version": prov.version,
            "seed": prov.seed,
            "config": prov.config_hash,
            "n": self.n,
            "resolution": self.resolution,
            "total_cost": self.total_cost,
            "min_value": self.min_value,
            "max_value": self.max_value,
            "buckets": self.wife_counts.len(),
            "wife_counts": self.wife_counts,
            "husband_counts": self.husband_counts,
        })
    }
}
