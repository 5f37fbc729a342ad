//! Doubling dynamics of four point sets and the models fitted to their costs.
//!
//! At level k there are four sets of 2^k points: old girls A, young girls B,
//! old boys C and young boys D. The next level keeps A ∪ B as its old girls
//! and C ∪ D as its old boys and draws fresh young sets. The six costs
//!
//! ```text
//! W1 = (A,C)  W2 = (A,D)  W3 = (B,C)  W4 = (B,D)  W5 = (A,B)  W6 = (C,D)
//! ```
//!
//! and the merged cost (A ∪ B, C ∪ D) form a [`DyadicRecord`]. The merged cost
//! at level k is W1 at level k + 1.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::assignment::{solve_exact, solve_matrix, DenseCost};
use crate::error::{Error, Result};
use crate::geometry::{fmt17, sample_uniform, Metric, PointSet};
use crate::hazard::{self, fit_mle_fixed_lambda, HazardParams};
use crate::optim::brent_min;
use crate::rng::{stream, Purpose};
use crate::stats::{self, ols};

/// Deepest level `evolve` builds.
pub const MAX_LEVEL: usize = 11;
pub const MIN_RECURSION_RECORDS: usize = 100;
pub const MIN_AR_RECORDS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadSets {
    pub a: PointSet,
    pub b: PointSet,
    pub c: PointSet,
    pub d: PointSet,
    pub level: usize,
}

impl QuadSets {
    pub fn new(a: PointSet, b: PointSet, c: PointSet, d: PointSet, level: usize) -> Result<Self> {
        let n = 1usize << level;
        for s in [&a, &b, &c, &d] {
            if s.len() != n {
                return Err(Error::InvalidInput(format!("level {level} needs {n} points per set, got {}", s.len())));
            }
            if s.metric() != a.metric() {
                return Err(Error::InvalidInput("the four sets use different metrics".into()));
            }
        }
        Ok(Self { a, b, c, d, level })
    }
}

/// Levels 0..=k_max of one replication, drawn from its own stream.
pub fn evolve(master_seed: u64, rep: u64, k_max: usize, metric: Metric) -> Result<Vec<QuadSets>> {
    if k_max > MAX_LEVEL {
        return Err(Error::TooLarge(k_max));
    }
    let mut rng = stream(master_seed, Purpose::Dyadic, rep);
    let mut draw = |n: usize| sample_uniform(n, metric, &mut rng);
    let mut levels = Vec::with_capacity(k_max + 1);
    let first = QuadSets::new(draw(1)?, draw(1)?, draw(1)?, draw(1)?, 0)?;
    levels.push(first);
    for k in 1..=k_max {
        let prev = &levels[k - 1];
        let a = prev.a.union(&prev.b)?;
        let c = prev.c.union(&prev.d)?;
        let n = 1usize << k;
        let b = draw(n)?;
        let d = draw(n)?;
        levels.push(QuadSets::new(a, b, c, d, k)?);
    }
    Ok(levels)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DyadicRecord {
    pub level: usize,
    /// W1..W6 for (A,C), (A,D), (B,C), (B,D), (A,B), (C,D).
    pub w: [f64; 6],
    /// Exact cost of A ∪ B against C ∪ D.
    pub merged: f64,
}

impl DyadicRecord {
    /// W1 + W2 + W3 + W4.
    pub fn cross_sum(&self) -> f64 {
        self.w[..4].iter().sum()
    }

    /// W5 + W6.
    pub fn same_sex_sum(&self) -> f64 {
        self.w[4] + self.w[5]
    }
}

fn six(q: &QuadSets) -> Result<[f64; 6]> {
    let pairs = [(&q.a, &q.c), (&q.a, &q.d), (&q.b, &q.c), (&q.b, &q.d), (&q.a, &q.b), (&q.c, &q.d)];
    let mut w = [0.0; 6];
    for (slot, (l, r)) in w.iter_mut().zip(pairs) {
        *slot = solve_exact(l, r)?.total_cost;
    }
    Ok(w)
}

pub fn six_distances(q: &QuadSets) -> Result<DyadicRecord> {
    let w = six(q)?;
    let merged = solve_exact(&q.a.union(&q.b)?, &q.c.union(&q.d)?)?.total_cost;
    Ok(DyadicRecord { level: q.level, w, merged })
}

/// Records for levels 0..=k_max of one replication. Each merged cost is
/// taken from W1 of the next level, so only the last one is solved separately.
pub fn dyadic_chain(master_seed: u64, rep: u64, k_max: usize, metric: Metric) -> Result<Vec<DyadicRecord>> {
    let levels = evolve(master_seed, rep, k_max, metric)?;
    let ws: Vec<[f64; 6]> = levels.iter().map(six).collect::<Result<_>>()?;
    let last = levels.last().expect("at least level 0");
    let top = solve_exact(&last.a.union(&last.b)?, &last.c.union(&last.d)?)?.total_cost;
    Ok(ws
        .iter()
        .enumerate()
        .map(|(k, w)| DyadicRecord { level: k, w: *w, merged: if k < k_max { ws[k + 1][0] } else { top } })
        .collect())
}

/// CSV `rep,k,w1,w2,w3,w4,w5,w6,merged`.
pub fn write_records_csv<W: Write>(w: W, records: &[(u64, DyadicRecord)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["rep", "k", "w1", "w2", "w3", "w4", "w5", "w6", "merged"])?;
    for (rep, r) in records {
        let mut row = vec![rep.to_string(), r.level.to_string()];
        row.extend(r.w.iter().map(|v| fmt17(*v)));
        row.push(fmt17(r.merged));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterceptFit {
    pub intercept: f64,
    pub a: f64,
    pub b: f64,
    pub noise_sd: f64,
}

/// Dispersion of merged − S₁/4.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestrictedFit {
    pub mean_residual: f64,
    pub residual_sd: f64,
    pub residual_variance: f64,
    pub residual_rms: f64,
}

/// merged ≈ a·S₁ − b·S₂ with S₁ = W1 + W2 + W3 + W4 and S₂ = W5 + W6.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecursionFit {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    /// Standard errors of (a, b).
    pub std_errors: [f64; 2],
    pub noise_sd: f64,
    pub residuals: Vec<f64>,
    /// |4a − 2b − 1|.
    pub stationarity_defect: f64,
    pub with_intercept: InterceptFit,
    pub restricted: RestrictedFit,
}

/// Least squares through the origin of merged on (S₁, −S₂), plus a
/// with-intercept diagnostic and the a = 1/4, b = 0 model.
///
/// Records may come from one level or be pooled across several.
pub fn fit_recursion(records: &[DyadicRecord]) -> Result<RecursionFit> {
    if records.len() < MIN_RECURSION_RECORDS {
        return Err(Error::InvalidInput(format!("need at least {MIN_RECURSION_RECORDS} records, got {}", records.len())));
    }
    let y: Vec<f64> = records.iter().map(|r| r.merged).collect();
    let rows: Vec<Vec<f64>> = records.iter().map(|r| vec![r.cross_sum(), -r.same_sex_sum()]).collect();
    let fit = ols(&rows, &y)?;
    let (a, b) = (fit.coefficients[0], fit.coefficients[1]);

    let rows1: Vec<Vec<f64>> = records.iter().map(|r| vec![1.0, r.cross_sum(), -r.same_sex_sum()]).collect();
    let fit1 = ols(&rows1, &y)?;

    let restricted: Vec<f64> = records.iter().map(|r| r.merged - r.cross_sum() / 4.0).collect();
    let rms = (restricted.iter().map(|v| v * v).sum::<f64>() / restricted.len() as f64).sqrt();

    Ok(RecursionFit {
        n: records.len(),
        a,
        b,
        std_errors: [fit.std_errors[0], fit.std_errors[1]],
        noise_sd: fit.residual_sd,
        stationarity_defect: (4.0 * a - 2.0 * b - 1.0).abs(),
        residuals: fit.residuals,
        with_intercept: InterceptFit {
            intercept: fit1.coefficients[0],
            a: fit1.coefficients[1],
            b: fit1.coefficients[2],
            noise_sd: fit1.residual_sd,
        },
        restricted: RestrictedFit {
            mean_residual: stats::mean(&restricted),
            residual_sd: stats::sd(&restricted),
            residual_variance: stats::variance(&restricted),
            residual_rms: rms,
        },
    })
}

/// E W_n ≈ β ln(n + α) + γ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanLawFit {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub rss: f64,
    pub converged: bool,
}

impl MeanLawFit {
    pub fn predict(&self, n: f64) -> f64 {
        self.beta * (n + self.alpha).ln() + self.gamma
    }
}

/// (β, γ, rss) of the linear fit for a fixed α.
fn linear_part(pairs: &[(f64, f64)], alpha: f64) -> (f64, f64, f64) {
    let xs: Vec<f64> = pairs.iter().map(|(n, _)| (n + alpha).ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|(_, y)| *y).collect();
    let (mx, my) = (stats::mean(&xs), stats::mean(&ys));
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let beta = sxy / sxx;
    let gamma = my - beta * mx;
    let rss = xs.iter().zip(&ys).map(|(x, y)| (y - beta * x - gamma).powi(2)).sum();
    (beta, gamma, rss)
}

/// Nonlinear least squares for the mean law.
///
/// β and γ are eliminated for each α (variable projection); α is searched as
/// α = −min n + e^t from the starts α ∈ {0, 0.5, 1}, then all three
/// parameters are polished by Gauss–Newton.
pub fn fit_mean_law(pairs: &[(f64, f64)]) -> Result<MeanLawFit> {
    if pairs.iter().any(|(n, y)| !(n.is_finite() && *n > 0.0 && y.is_finite())) {
        return Err(Error::Domain("sizes must be positive and means finite".into()));
    }
    let mut distinct: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(Error::InvalidInput(format!("need at least 4 distinct sizes, got {}", distinct.len())));
    }
    let n_min = distinct[0];
    let rss_t = |t: f64| linear_part(pairs, -n_min + t.exp()).2;

    let mut best: Option<(f64, f64)> = None;
    let mut interior = false;
    for alpha0 in [0.0, 0.5, 1.0] {
        let t0 = (alpha0 + n_min).ln();
        // expand a bracket downhill from the start
        let mut step = 0.5;
        let (mut lo, mut hi) = (t0 - step, t0 + step);
        let mut found = false;
        for _ in 0..80 {
            let (flo, f0, fhi) = (rss_t(lo), rss_t(0.5 * (lo + hi)), rss_t(hi));
            if f0 <= flo && f0 <= fhi {
                found = true;
                break;
            }
            step *= 1.6;
            if flo < fhi {
                lo -= step;
            } else {
                hi += step;
            }
            if lo < -700.0 || hi > 30.0 {
                break;
            }
        }
        let (t, f) = if found { brent_min(rss_t, lo, hi, 1e-14, 500) } else if rss_t(lo) < rss_t(hi) { (lo, rss_t(lo)) } else { (hi, rss_t(hi)) };
        if best.is_none_or(|(_, fb)| f < fb) {
            best = Some((t, f));
            interior = found;
        }
    }
    let (t, _) = best.expect("three starts");
    let mut alpha = -n_min + t.exp();
    let (mut beta, mut gamma, mut rss) = linear_part(pairs, alpha);

    for _ in 0..20 {
        let rows: Vec<Vec<f64>> = pairs.iter().map(|(n, _)| vec![beta / (n + alpha), (n + alpha).ln(), 1.0]).collect();
        let res: Vec<f64> = pairs.iter().map(|(n, y)| y - beta * (n + alpha).ln() - gamma).collect();
        let Ok(step) = ols(&rows, &res) else { break };
        let d = &step.coefficients;
        let cand = (alpha + d[0], beta + d[1], gamma + d[2]);
        if cand.0 <= -n_min {
            break;
        }
        let cand_rss: f64 = pairs.iter().map(|(n, y)| (y - cand.1 * (n + cand.0).ln() - cand.2).powi(2)).sum();
        if !(cand_rss < rss) {
            break;
        }
        (alpha, beta, gamma, rss) = (cand.0, cand.1, cand.2, cand_rss);
    }
    Ok(MeanLawFit { alpha, beta, gamma, rss, converged: interior && alpha.is_finite() })
}

/// Conditional law of one coordinate: location γ₀ + Σ γₛ Wₛ plus σ times a
/// standard (λ = 1) Gaussian-hazard variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArRow {
    /// γ₀ (location intercept) followed by the slopes on the conditioning values.
    pub gamma: Vec<f64>,
    pub sigma: f64,
    /// Intercept of the least-squares mean, before the location shift.
    pub ols_intercept: f64,
}

impl ArRow {
    pub fn location(&self, given: &[f64]) -> f64 {
        self.gamma[0] + self.gamma[1..].iter().zip(given).map(|(g, w)| g * w).sum::<f64>()
    }
}

/// Autoregressive model for one level: W_{i+1} | W_1..W_i for i = 0..5, and
/// the next level's W1 (this level's merged cost) given W_1..W_6.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ARModel {
    pub level: usize,
    /// `rows[i]` models W_{i+1}; `rows[0]` is the marginal of W1.
    pub rows: Vec<ArRow>,
    pub next: ArRow,
}

impl ARModel {
    /// γ_{is} for i in 2..=6 and s in 0..i, with s = 0 the location intercept.
    pub fn gamma(&self, i: usize, s: usize) -> f64 {
        self.rows[i - 1].gamma[s]
    }

    /// σ₁..σ₆.
    pub fn sigmas(&self) -> [f64; 6] {
        std::array::from_fn(|i| self.rows[i].sigma)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut m = self.clone();
        m.rows.iter_mut().chain(std::iter::once(&mut m.next)).for_each(|r| r.sigma *= factor);
        m
    }
}

fn fit_row(given: &[Vec<f64>], y: &[f64]) -> Result<ArRow> {
    let rows: Vec<Vec<f64>> = given.iter().map(|g| std::iter::once(1.0).chain(g.iter().copied()).collect()).collect();
    let lin = ols(&rows, y)?;
    let shift = fit_mle_fixed_lambda(&lin.residuals, 1.0)?;
    let mut gamma = lin.coefficients.clone();
    gamma[0] += shift.params.mu;
    Ok(ArRow { gamma, sigma: shift.params.sigma, ols_intercept: lin.coefficients[0] })
}

/// Fits every row by least squares with intercept, then fits a λ = 1
/// Gaussian-hazard law to the residuals; its location shifts the intercept
/// and its scale is σ.
pub fn fit_ar_model(records: &[DyadicRecord]) -> Result<ARModel> {
    if records.len() < MIN_AR_RECORDS {
        return Err(Error::InvalidInput(format!("need at least {MIN_AR_RECORDS} records, got {}", records.len())));
    }
    let level = records[0].level;
    if records.iter().any(|r| r.level != level) {
        return Err(Error::InvalidInput("records span more than one level".into()));
    }
    let mut rows = Vec::with_capacity(6);
    for i in 0..6 {
        let given: Vec<Vec<f64>> = records.iter().map(|r| r.w[..i].to_vec()).collect();
        let y: Vec<f64> = records.iter().map(|r| r.w[i]).collect();
        rows.push(fit_row(&given, &y)?);
    }
    let given: Vec<Vec<f64>> = records.iter().map(|r| r.w.to_vec()).collect();
    let y: Vec<f64> = records.iter().map(|r| r.merged).collect();
    let next = fit_row(&given, &y)?;
    Ok(ARModel { level, rows, next })
}

/// Length of the vector produced by [`simulate_ar`] from levels 0..=k_max.
pub fn chain_dim(k_max: usize) -> usize {
    6 * (k_max + 1) + 1
}

fn draw<R: Rng + ?Sized>(row: &ArRow, given: &[f64], rng: &mut R) -> f64 {
    let loc = row.location(given);
    if row.sigma == 0.0 {
        return loc;
    }
    loc + row.sigma * hazard::sample_one(HazardParams::STANDARD, rng)
}

/// One chained draw through `models[0..]`, which must hold levels 0, 1, 2, ...
/// in order: W1..W6 per level (level-major), then the last level's merged cost.
pub fn simulate_ar<R: Rng + ?Sized>(models: &[ARModel], rng: &mut R) -> Result<Vec<f64>> {
    if models.is_empty() {
        return Err(Error::MissingLevel(0));
    }
    for (k, m) in models.iter().enumerate() {
        if m.level != k || m.rows.len() != 6 {
            return Err(Error::MissingLevel(k));
        }
    }
    let mut out = Vec::with_capacity(chain_dim(models.len() - 1));
    let mut carried: Option<f64> = None;
    for m in models {
        let mut w = [0.0; 6];
        w[0] = match carried {
            Some(v) => v,
            None => draw(&m.rows[0], &[], rng),
        };
        for i in 1..6 {
            w[i] = draw(&m.rows[i], &w[..i], rng);
        }
        out.extend_from_slice(&w);
        carried = Some(draw(&m.next, &w, rng));
    }
    out.push(carried.expect("at least one level"));
    Ok(out)
}

/// The data vector matching [`simulate_ar`]'s layout for one replication.
pub fn chain_vector(records: &[DyadicRecord]) -> Vec<f64> {
    let mut v: Vec<f64> = records.iter().flat_map(|r| r.w).collect();
    if let Some(last) = records.last() {
        v.push(last.merged);
    }
    v
}

/// Exact assignment cost between two equal-size clouds of vectors under
/// squared Euclidean distance.
pub fn model_vs_data_wasserstein(model: &[Vec<f64>], data: &[Vec<f64>]) -> Result<f64> {
    if model.is_empty() {
        return Err(Error::EmptyInput("vectors"));
    }
    if model.len() != data.len() {
        return Err(Error::InvalidInput(format!("{} model vectors against {} data vectors", model.len(), data.len())));
    }
    let dim = model[0].len();
    if model.iter().chain(data).any(|v| v.len() != dim) {
        return Err(Error::InvalidInput(format!("all vectors must have dimension {dim}")));
    }
    let n = model.len();
    let c = DenseCost::from_fn(n, |i, j| model[i].iter().zip(&data[j]).map(|(a, b)| (a - b) * (a - b)).sum());
    let sol = solve_matrix(&c);
    Ok(sol.row_to_col.iter().enumerate().map(|(i, &j)| crate::assignment::CostMatrix::at(&c, i, j)).sum())
}
