//! The Gaussian-hazard-rate family.
//!
//! The standard member has hazard rate Φ(x), integrated hazard
//! G(x) = xΦ(x) + φ(x) and density Φ(x)·exp(−G(x)). The three-parameter
//! family is σX_λ + μ where X_λ has hazard λΦ: with y = (x − μ)/σ,
//!
//! ```text
//! R(x) = λ G(y),   tail(x) = exp(−R(x)),   f(x) = (λ/σ) Φ(y) exp(−λ G(y)).
//! ```
//!
//! Everything is evaluated through logarithms so both tails stay accurate.

use std::io::Write;

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal::{cdf, ln_cdf, ln_partial_expectation, mills_inv, partial_expectation};
use crate::optim::{bfgs, BfgsOptions};
use crate::rng::{stream, Purpose};
use crate::stats;

/// Mean of the standard member (μ, σ, λ) = (0, 1, 1).
pub const STD_MEAN: f64 = 0.633_651_256_600_719_9;
/// Standard deviation of the standard member.
pub const STD_SD: f64 = 1.318_722_871_551_273;
/// Smallest sample accepted by the fitting routines.
pub const MIN_FIT_SIZE: usize = 30;
/// Convergence threshold on the per-observation gradient.
pub const FIT_GTOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HazardParams {
    pub mu: f64,
    pub sigma: f64,
    pub lambda: f64,
}

impl HazardParams {
    pub const STANDARD: HazardParams = HazardParams { mu: 0.0, sigma: 1.0, lambda: 1.0 };

    pub fn new(mu: f64, sigma: f64, lambda: f64) -> Result<Self> {
        if !mu.is_finite() || !(sigma > 0.0 && sigma.is_finite()) || !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Domain(format!("need finite mu, sigma > 0, lambda > 0; got ({mu}, {sigma}, {lambda})")));
        }
        Ok(Self { mu, sigma, lambda })
    }

    #[inline]
    fn y(&self, x: f64) -> f64 {
        (x - self.mu) / self.sigma
    }

    pub fn mean(&self) -> f64 {
        self.mu + self.sigma * standardized_moments(self.lambda).0
    }

    pub fn sd(&self) -> f64 {
        self.sigma * standardized_moments(self.lambda).1
    }
}

/// Standard density Φ(x)·exp(−xΦ(x) − φ(x)).
pub fn std_density(x: f64) -> f64 {
    (ln_cdf(x) - partial_expectation(x)).exp()
}

/// d/dx ln std_density = φ(x)/Φ(x) − Φ(x).
pub fn std_log_density_slope(x: f64) -> f64 {
    mills_inv(x) - cdf(x)
}

/// R(x) = λ(yΦ(y) + φ(y)).
pub fn integrated_hazard(x: f64, p: HazardParams) -> f64 {
    p.lambda * partial_expectation(p.y(x))
}

/// Hazard rate λΦ(y)/σ.
pub fn hazard_rate(x: f64, p: HazardParams) -> f64 {
    p.lambda * cdf(p.y(x)) / p.sigma
}

pub fn ln_tail(x: f64, p: HazardParams) -> f64 {
    -integrated_hazard(x, p)
}

/// P(X > x) = exp(−R(x)).
pub fn tail(x: f64, p: HazardParams) -> f64 {
    ln_tail(x, p).exp()
}

pub fn ln_density(x: f64, p: HazardParams) -> f64 {
    let y = p.y(x);
    p.lambda.ln() - p.sigma.ln() + ln_cdf(y) - p.lambda * partial_expectation(y)
}

pub fn density(x: f64, p: HazardParams) -> f64 {
    ln_density(x, p).exp()
}

/// Density of X_λ / λ^α, the rescaled shape family.
pub fn scaled_std_density(x: f64, lambda: f64, alpha: f64) -> f64 {
    let s = lambda.powf(alpha);
    s * density(s * x, HazardParams { mu: 0.0, sigma: 1.0, lambda })
}

/// The y with λ·G(y) = e, i.e. the point whose integrated hazard is `e`.
///
/// Safeguarded Newton on ln G(y) − ln(e/λ), which is increasing and concave
/// in y, inside an expanding bracket.
pub fn quantile_from_exponential(e: f64, p: HazardParams) -> Result<f64> {
    if !(e > 0.0) || !e.is_finite() {
        return Err(Error::Domain(format!("exponential level must be positive and finite, got {e}")));
    }
    let target = (e / p.lambda).ln();
    let g = |y: f64| ln_partial_expectation(y) - target;

    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    while g(lo) > 0.0 {
        lo = 2.0 * lo - 1.0;
    }
    while g(hi) < 0.0 {
        hi = 2.0 * hi + 1.0;
    }

    let tol = 1e-13 * e.max(1.0);
    let mut y = if e / p.lambda > 1.0 { (e / p.lambda).clamp(lo, hi) } else { 0.5 * (lo + hi) };
    for _ in 0..200 {
        let gy = g(y);
        if (p.lambda * partial_expectation(y) - e).abs() <= tol || gy == 0.0 {
            break;
        }
        if gy < 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        let slope = (ln_cdf(y) - ln_partial_expectation(y)).exp();
        let newton = y - gy / slope;
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if next == y || hi - lo <= 4.0 * f64::EPSILON * y.abs().max(1.0) {
            break;
        }
        y = next;
    }
    Ok(p.mu + p.sigma * y)
}

/// One draw: the quantile of a standard exponential.
pub fn sample_one<R: Rng + ?Sized>(p: HazardParams, rng: &mut R) -> f64 {
    loop {
        let e: f64 = rng.sample(Exp1);
        if e > 0.0 {
            return quantile_from_exponential(e, p).expect("positive exponential level");
        }
    }
}

pub fn sample<R: Rng + ?Sized>(p: HazardParams, n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| sample_one(p, rng)).collect()
}

/// Mean and standard deviation of X_λ (μ = 0, σ = 1).
///
/// From the tail: E X = ∫₀^∞ Q − ∫_{−∞}^0 (1 − Q) and
/// E X² = 2∫₀^∞ yQ + 2∫_{−∞}^0 |y|(1 − Q).
pub fn standardized_moments(lambda: f64) -> (f64, f64) {
    let q = |y: f64| (-lambda * partial_expectation(y)).exp();
    let one_minus_q = |y: f64| -(-lambda * partial_expectation(y)).exp_m1();
    let hi = 60.0 / lambda + 10.0;
    let lo = -40.0;
    let right = adaptive_simpson(&q, 0.0, hi, 1e-13);
    let left = adaptive_simpson(&one_minus_q, lo, 0.0, 1e-13);
    let right2 = adaptive_simpson(&|y| 2.0 * y * q(y), 0.0, hi, 1e-13);
    let left2 = adaptive_simpson(&|y| -2.0 * y * one_minus_q(y), lo, 0.0, 1e-13);
    let mean = right - left;
    (mean, (right2 + left2 - mean * mean).sqrt())
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    // split first so narrow features cannot hide between the initial nodes
    let pieces = 64;
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let (x0, x1) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            let (f0, fm, f1) = (f(x0), f(0.5 * (x0 + x1)), f(x1));
            rec(f, x0, x1, f0, fm, f1, h / 6.0 * (f0 + 4.0 * fm + f1), tol / pieces as f64, 40)
        })
        .sum()
}

/// Σ ln f(xᵢ | p).
pub fn log_likelihood(data: &[f64], p: HazardParams) -> f64 {
    data.iter().map(|&x| ln_density(x, p)).sum()
}

/// Gradient of Σ ln f with respect to (μ, ln σ, ln λ).
pub fn log_likelihood_gradient(data: &[f64], p: HazardParams) -> [f64; 3] {
    let mut g = [0.0; 3];
    for &x in data {
        let y = p.y(x);
        let score = mills_inv(y) - p.lambda * cdf(y);
        g[0] -= score / p.sigma;
        g[1] -= 1.0 + y * score;
        g[2] += 1.0 - p.lambda * partial_expectation(y);
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: HazardParams,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("plain struct serializes")
    }
}

/// Negative mean log-likelihood over (μ, ln σ, ln λ) for standardized data,
/// with `fixed_lambda` pinning the third coordinate.
fn objective(z: &[f64], theta: &[f64], grad: &mut [f64], fixed_lambda: Option<f64>) -> f64 {
    let mu = theta[0];
    let sigma = theta[1].exp();
    let lambda = fixed_lambda.unwrap_or_else(|| theta[2].exp());
    if !(sigma > 0.0 && sigma.is_finite() && lambda > 0.0 && lambda.is_finite()) {
        return f64::INFINITY;
    }
    let n = z.len() as f64;
    let (mut f, mut g0, mut g1, mut g2) = (0.0, 0.0, 0.0, 0.0);
    let log_norm = lambda.ln() - sigma.ln();
    for &x in z {
        let y = (x - mu) / sigma;
        let pe = partial_expectation(y);
        let phi_cdf = cdf(y);
        let score = mills_inv(y) - lambda * phi_cdf;
        f += log_norm + ln_cdf(y) - lambda * pe;
        g0 -= score / sigma;
        g1 -= 1.0 + y * score;
        g2 += 1.0 - lambda * pe;
    }
    grad[0] = -g0 / n;
    grad[1] = -g1 / n;
    if grad.len() > 2 {
        grad[2] = -g2 / n;
    }
    -f / n
}

fn check_data(data: &[f64]) -> Result<(f64, f64)> {
    if data.len() < MIN_FIT_SIZE {
        return Err(Error::InvalidInput(format!("need at least {MIN_FIT_SIZE} observations, got {}", data.len())));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("data contain non-finite values".into()));
    }
    let (m, s) = (stats::mean(data), stats::sd(data));
    if !(s > 0.0) {
        return Err(Error::Degenerate("sample standard deviation is zero".into()));
    }
    Ok((m, s))
}

fn fit(data: &[f64], fixed_lambda: Option<f64>) -> Result<FitResult> {
    let (m, s) = check_data(data)?;
    let z: Vec<f64> = data.iter().map(|x| (x - m) / s).collect();

    // moment match of the standard member to mean 0, sd 1
    let sigma0 = 1.0 / STD_SD;
    let mu0 = -STD_MEAN * sigma0;
    let mut starts = vec![[mu0, sigma0.ln(), 0.0]];
    for (dmu, ds, dl) in [(0.3, -0.4, -0.7), (-0.3, 0.4, 0.7), (0.0, -0.6, 0.9), (0.5, 0.3, -0.9)] {
        starts.push([mu0 + dmu, sigma0.ln() + ds, dl]);
    }
    if let Some(l) = fixed_lambda.filter(|&l| l != 1.0) {
        // a different shape changes the location and scale that match the moments
        let (ml, sl) = standardized_moments(l);
        let sigma = 1.0 / sl;
        starts[0] = [-ml * sigma, sigma.ln(), 0.0];
        starts.dedup();
    }

    let dim = if fixed_lambda.is_some() { 2 } else { 3 };
    let mut best: Option<crate::optim::Minimum> = None;
    for st in &starts {
        let m = bfgs(|t, g| objective(&z, t, g, fixed_lambda), &st[..dim], BfgsOptions { gtol: 1e-8, max_iter: 300 });
        if m.value.is_finite() && best.as_ref().is_none_or(|b| m.value < b.value) {
            best = Some(m);
        }
    }
    let best = best.ok_or_else(|| Error::Degenerate("likelihood is not finite at any start".into()))?;

    let lambda = fixed_lambda.unwrap_or_else(|| best.x[2].exp());
    let params = HazardParams::new(m + s * best.x[0], s * best.x[1].exp(), lambda)?;
    let grad = log_likelihood_gradient(data, params);
    let n = data.len() as f64;
    let gmax = grad[..dim].iter().fold(0.0f64, |a, g| a.max((g / n).abs()));
    Ok(FitResult { params, log_likelihood: log_likelihood(data, params), converged: gmax <= FIT_GTOL, iterations: best.iterations })
}

/// Maximum-likelihood fit of (μ, σ, λ).
///
/// Optimizes (μ, ln σ, ln λ) by BFGS on standardized data from a moment
/// start and four perturbations, keeping the best. `converged` requires the
/// per-observation gradient in (μ, ln σ, ln λ) to have max-norm ≤ 1e-6.
pub fn fit_mle(data: &[f64]) -> Result<FitResult> {
    fit(data, None)
}

/// Maximum-likelihood fit of (μ, σ) with λ held fixed.
pub fn fit_mle_fixed_lambda(data: &[f64], lambda: f64) -> Result<FitResult> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    fit(data, Some(lambda))
}

/// Probability-integral transform of a sample and its Kolmogorov statistic.
#[derive(Debug, Clone)]
pub struct Pit {
    pub ks: f64,
    pub uniforms: Vec<f64>,
}

impl Pit {
    /// CSV with the single column `u`, in data order.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["u"])?;
        for u in &self.uniforms {
            out.write_record([crate::geometry::fmt17(*u)])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// uᵢ = exp(−R(xᵢ)) and ks = √N·sup|F_N − U|.
pub fn pit_statistic(data: &[f64], p: HazardParams) -> Result<Pit> {
    if data.is_empty() {
        return Err(Error::EmptyInput("data"));
    }
    let uniforms: Vec<f64> = data.iter().map(|&x| tail(x, p)).collect();
    Ok(Pit { ks: stats::ks_uniform(&uniforms), uniforms })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutpoints {
    pub c05: f64,
    pub c01: f64,
    pub n_obs: usize,
    pub n_trials: usize,
    pub discarded: usize,
}

/// Minimum number of calibration trials.
pub const MIN_CALIBRATION_TRIALS: usize = 2000;

/// Kolmogorov cut-points for the PIT test with fitted parameters.
///
/// Each trial draws `n_obs` values from the standard member, fits all three
/// parameters and records the PIT statistic at the fit. Trials whose fit
/// fails or does not converge are discarded; more than 1% discarded is an
/// error.
pub fn calibrate_cutpoints(n_obs: usize, n_trials: usize, master_seed: u64) -> Result<Cutpoints> {
    if n_trials < MIN_CALIBRATION_TRIALS {
        return Err(Error::InvalidInput(format!("need at least {MIN_CALIBRATION_TRIALS} trials, got {n_trials}")));
    }
    let results: Vec<Option<f64>> = (0..n_trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(master_seed, Purpose::Calibration, t);
            let data = sample(HazardParams::STANDARD, n_obs, &mut rng);
            let fit = fit_mle(&data).ok().filter(|f| f.converged)?;
            pit_statistic(&data, fit.params).ok().map(|p| p.ks)
        })
        .collect();
    let mut ks: Vec<f64> = results.iter().flatten().copied().collect();
    let discarded = n_trials - ks.len();
    if discarded * 100 >= n_trials {
        return Err(Error::Degenerate(format!("{discarded} of {n_trials} calibration fits failed")));
    }
    ks.sort_by(f64::total_cmp);
    Ok(Cutpoints {
        c05: stats::quantile_sorted(&ks, 0.95),
        c01: stats::quantile_sorted(&ks, 0.99),
        n_obs,
        n_trials,
        discarded,
    })
}

#[cfg(test)]
mod tests;
