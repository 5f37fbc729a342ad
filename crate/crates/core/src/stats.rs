//! Descriptive statistics and least squares.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance with the n − 1 divisor.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

pub fn sd(x: &[f64]) -> f64 {
    variance(x).sqrt()
}

/// Standard error of the mean.
pub fn std_error(x: &[f64]) -> f64 {
    sd(x) / (x.len() as f64).sqrt()
}

/// Moment skewness m₃ / m₂^{3/2}.
pub fn skewness(x: &[f64]) -> f64 {
    let m = mean(x);
    let n = x.len() as f64;
    let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m3 = x.iter().map(|v| (v - m).powi(3)).sum::<f64>() / n;
    m3 / m2.powf(1.5)
}

/// Pearson correlation.
pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

/// Symmetric correlation matrix with an exact unit diagonal.
pub fn correlation_matrix(columns: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = columns.len();
    let mut r = vec![vec![1.0; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let c = correlation(&columns[i], &columns[j]);
            r[i][j] = c;
            r[j][i] = c;
        }
    }
    r
}

/// Empirical quantile with linear interpolation between order statistics
/// (the "type 7" definition). `sorted` must be ascending.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// √N · sup |F_N(u) − u| for a sample that should be uniform on (0, 1).
pub fn ks_uniform(uniforms: &[f64]) -> f64 {
    let mut u = uniforms.to_vec();
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    let d = u
        .iter()
        .enumerate()
        .map(|(i, &v)| ((i as f64 + 1.0) / n - v).max(v - i as f64 / n))
        .fold(0.0, f64::max);
    n.sqrt() * d
}

/// Least-squares fit of `y ≈ X β`.
#[derive(Debug, Clone)]
pub struct LinearFit {
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Residual standard deviation with n − p degrees of freedom.
    pub residual_sd: f64,
    /// Classical standard errors of the coefficients.
    pub std_errors: Vec<f64>,
}

/// Ordinary least squares through a thin SVD. `rows` are the design rows.
pub fn ols(rows: &[Vec<f64>], y: &[f64]) -> Result<LinearFit> {
    let n = rows.len();
    if n == 0 || n != y.len() {
        return Err(Error::InvalidInput(format!("design has {n} rows for {} responses", y.len())));
    }
    let p = rows[0].len();
    if n <= p {
        return Err(Error::RankDeficient(format!("{n} observations for {p} coefficients")));
    }
    let x = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > smax * 1e-10) {
        return Err(Error::RankDeficient(format!("condition number {:.3e}", smax / smin)));
    }
    let yv = DVector::from_column_slice(y);
    let beta = svd.solve(&yv, 0.0).map_err(|e| Error::RankDeficient(e.to_string()))?;
    let fitted = &x * &beta;
    let residuals: Vec<f64> = (0..n).map(|i| y[i] - fitted[i]).collect();
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let residual_sd = (rss / (n - p) as f64).sqrt();
    // diag (XᵀX)⁻¹ = Σₖ V_jk² / s_k²
    let v_t = svd.v_t.as_ref().expect("requested V");
    let std_errors = (0..p)
        .map(|j| {
            let d: f64 = (0..p).map(|k| (v_t[(k, j)] / svd.singular_values[k]).powi(2)).sum();
            residual_sd * d.sqrt()
        })
        .collect();
    Ok(LinearFit { coefficients: beta.iter().copied().collect(), residuals, residual_sd, std_errors })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments() {
        let x = [1.0, 2.0, 3.0, 4.0, 10.0];
        assert_eq!(mean(&x), 4.0);
        assert!((variance(&x) - 12.5).abs() < 1e-12);
        assert!(skewness(&x) > 0.0);
        assert!(skewness(&[1.0, 2.0, 3.0]).abs() < 1e-15);
    }

    #[test]
    fn correlation_extremes() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [2.0, 4.0, 6.0, 8.5];
        assert!((correlation(&x, &x) - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((correlation(&x, &neg) + 1.0).abs() < 1e-15);
        let m = correlation_matrix(&[x.to_vec(), y.to_vec(), neg]);
        for i in 0..3 {
            assert_eq!(m[i][i], 1.0);
            for j in 0..3 {
                assert_eq!(m[i][j], m[j][i]);
            }
        }
    }

    #[test]
    fn quantiles() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&s, 0.0), 1.0);
        assert_eq!(quantile_sorted(&s, 1.0), 5.0);
        assert_eq!(quantile_sorted(&s, 0.5), 3.0);
        assert!((quantile_sorted(&s, 0.95) - 4.8).abs() < 1e-12);
    }

    #[test]
    fn ks_hand_values() {
        assert!((ks_uniform(&[0.25, 0.5, 0.75]) - 3f64.sqrt() * 0.25).abs() < 1e-15);
        assert!((ks_uniform(&[0.5]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ols_exact_recovery_and_rank_check() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![1.0, i as f64, (i * i) as f64 * 0.1]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 0.5 + 2.0 * r[1] - 3.0 * r[2]).collect();
        let fit = ols(&rows, &y).unwrap();
        for (b, want) in fit.coefficients.iter().zip([0.5, 2.0, -3.0]) {
            assert!((b - want).abs() < 1e-10);
        }
        assert!(fit.residual_sd < 1e-10);
        // slope standard error of simple regression: σ / √Sxx
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![1.0, i as f64]).collect();
        let y2 = [0.1, 1.3, 1.9, 3.2, 3.8, 5.1, 6.2, 6.8, 8.1, 9.0];
        let fit = ols(&rows, &y2).unwrap();
        let sxx: f64 = (0..10).map(|i| (i as f64 - 4.5).powi(2)).sum();
        assert!((fit.std_errors[1] - fit.residual_sd / sxx.sqrt()).abs() < 1e-12);
        let collinear: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        assert!(matches!(ols(&collinear, &y), Err(Error::RankDeficient(_))));
    }
}
