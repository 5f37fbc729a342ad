use super::*;
use crate::normal::pdf;
use proptest::prelude::*;
use rand::Rng;

// Reference values computed independently in double precision with scipy.
const F0: f64 = 0.335_514_715_892_556;
const TAIL0: f64 = 0.671_029_431_785_112;
const MODE: f64 = 0.299_271_282_268_87;
/// 99% quantile of the Kolmogorov distribution.
const K99: f64 = 1.627_6;

fn p(mu: f64, sigma: f64, lambda: f64) -> HazardParams {
    HazardParams::new(mu, sigma, lambda).unwrap()
}

/// Composite Simpson on a uniform grid; deliberately simpler than the
/// adaptive rule used in the module.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn std_density_values() {
    assert!((std_density(0.0) - F0).abs() < 1e-14);
    assert!((std_density(0.0) - 0.5 * (-pdf(0.0)).exp()).abs() < 1e-15);
    let total = simpson(std_density, -20.0, 40.0, 200_000);
    assert!((total - 1.0).abs() < 1e-8, "{total}");
}

#[test]
fn mode_is_root_of_cdf_squared_minus_pdf() {
    // bisection on Φ² − φ
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..100 {
        let m = 0.5 * (lo + hi);
        if cdf(m).powi(2) - pdf(m) < 0.0 {
            lo = m;
        } else {
            hi = m;
        }
    }
    assert!((lo - MODE).abs() < 1e-12);
    // the density slope vanishes there and the maximum sits there
    assert!(std_log_density_slope(MODE).abs() < 1e-12);
    let (arg, _) = crate::optim::brent_min(|x| -std_density(x), -1.0, 2.0, 1e-12, 200);
    assert!((arg - MODE).abs() < 1e-6 && (arg - 0.2997).abs() < 1e-3);
}

#[test]
fn integrated_hazard_values() {
    assert!((integrated_hazard(0.0, p(0.0, 1.0, 1.0)) - 0.398_942_280_401_432_7).abs() < 1e-15);
    assert!((integrated_hazard(0.0, p(0.0, 1.0, 2.0)) - 0.797_884_560_802_865_4).abs() < 1e-15);
    assert!(integrated_hazard(-40.0, HazardParams::STANDARD) < 1e-300);
}

#[test]
fn integrated_hazard_monotone_scan() {
    let mut rng = crate::rng::stream(1, crate::rng::Purpose::Misc, 0);
    let par = p(0.3, 0.7, 1.7);
    for _ in 0..10_000 {
        let a: f64 = rng.random_range(-40.0..40.0);
        let b: f64 = rng.random_range(-40.0..40.0);
        let (x1, x2) = if a < b { (a, b) } else { (b, a) };
        assert!(integrated_hazard(x1, par) <= integrated_hazard(x2, par));
    }
}

#[test]
fn density_reduces_to_standard() {
    for x in [-2.0, 0.0, 2.0] {
        assert!((density(x, HazardParams::STANDARD) - std_density(x)).abs() < 1e-15);
    }
}

#[test]
fn density_normalized_on_grid() {
    let mut grid = vec![(0.0, 1.0, 0.1), (1.0, 2.0, 1.0), (-1.0, 0.5, 10.0)];
    for mu in [-1.0, 0.0, 1.5] {
        for sigma in [0.5, 1.0, 2.0] {
            for lambda in [0.1, 1.0, 10.0] {
                grid.push((mu, sigma, lambda));
            }
        }
    }
    for (mu, sigma, lambda) in grid {
        let par = p(mu, sigma, lambda);
        let (a, b) = (mu - 40.0 * sigma, mu + sigma * (40.0 + 60.0 / lambda));
        let total = simpson(|x| density(x, par), a, b, 400_000);
        assert!((total - 1.0).abs() < 1e-8, "({mu},{sigma},{lambda}) -> {total}");
    }
}

#[test]
fn hazard_ratio_identity() {
    let mut rng = crate::rng::stream(2, crate::rng::Purpose::Misc, 0);
    for _ in 0..2000 {
        let par = p(rng.random_range(-2.0..2.0), rng.random_range(0.1..3.0), rng.random_range(0.1..10.0));
        let x = par.mu + par.sigma * rng.random_range(-8.0..8.0);
        let t = tail(x, par);
        if t > 1e-12 {
            let ratio = density(x, par) / t;
            let want = hazard_rate(x, par);
            assert!((ratio - want).abs() <= 1e-8 * want.max(1e-300) + 1e-300, "{x} {par:?}");
        }
    }
}

#[test]
fn tail_values() {
    assert!(tail(-30.0, HazardParams::STANDARD) > 1.0 - 1e-6);
    assert!((tail(0.0, HazardParams::STANDARD) - TAIL0).abs() < 1e-14);
    for x in [-5.0, -1.0, 0.0, 0.7, 3.0, 20.0] {
        let t1 = tail(x, p(0.0, 1.0, 1.0));
        assert!((tail(x, p(0.0, 1.0, 2.0)) - t1 * t1).abs() < 1e-12);
    }
    // the log tail is never re-derived from a rounded tail
    assert_eq!(ln_tail(60.0, HazardParams::STANDARD), -partial_expectation(60.0));
    assert!(ln_tail(1e5, HazardParams::STANDARD).is_finite());
}

#[test]
fn log_slope_matches_finite_differences() {
    let mut prev = f64::INFINITY;
    for i in 0..400 {
        let x = -10.0 + i as f64 * 0.05;
        let h = 1e-5;
        let fd = ((std_density(x + h)).ln() - (std_density(x - h)).ln()) / (2.0 * h);
        let s = std_log_density_slope(x);
        assert!((fd - s).abs() < 1e-6 * s.abs().max(1.0), "{x}");
        if x < 6.0 {
            assert!(s < prev, "{x}");
        } else {
            assert!(s <= prev, "{x}");
        }
        prev = s;
    }
    assert!((std_log_density_slope(40.0) + 1.0).abs() < 1e-12);
}

#[test]
fn moments_of_standard_member() {
    let (m, s) = standardized_moments(1.0);
    assert!((m - STD_MEAN).abs() < 1e-9 && (s - STD_SD).abs() < 1e-9, "{m} {s}");
    for (lambda, mean, sd) in [
        (0.1, 9.951_807_395_540_172, 10.048_077_860_352_121),
        (2.0, -0.085_375_779_459_080_2, 0.926_059_834_576_478_2),
        (10.0, -1.133_630_838_888_930_5, 0.600_369_749_844_975_5),
    ] {
        let (m, s) = standardized_moments(lambda);
        assert!((m - mean).abs() < 1e-8 && (s - sd).abs() < 1e-8, "{lambda}: {m} {s}");
    }
    let par = p(1.0, 2.0, 1.0);
    assert!((par.mean() - (1.0 + 2.0 * STD_MEAN)).abs() < 1e-9);
}

#[test]
fn quantile_inverts_integrated_hazard() {
    let y = quantile_from_exponential(pdf(0.0), HazardParams::STANDARD).unwrap();
    assert!(y.abs() < 1e-8);
    // the rounded input moves the root by (0.3989423 − φ(0))/Φ(0) ≈ 4e-8
    let y = quantile_from_exponential(0.398_942_3, HazardParams::STANDARD).unwrap();
    assert!((y - 2.0 * (0.398_942_3 - pdf(0.0))).abs() < 1e-12);
    assert!(quantile_from_exponential(0.0, HazardParams::STANDARD).is_err());
    assert!(quantile_from_exponential(-1.0, HazardParams::STANDARD).is_err());
    assert!(quantile_from_exponential(f64::NAN, HazardParams::STANDARD).is_err());
    for par in [p(0.0, 1.0, 1.0), p(-1.0, 0.5, 10.0), p(2.0, 3.0, 0.1)] {
        for i in -300..=30 {
            let e = 10f64.powf(i as f64 / 10.0);
            let x = quantile_from_exponential(e, par).unwrap();
            let r = integrated_hazard(x, par);
            assert!((r - e).abs() <= 1e-12 * e.max(1.0), "{par:?} e={e} R={r}");
        }
    }
}

#[test]
fn sampler_passes_kolmogorov() {
    let mut rng = crate::rng::stream(3, crate::rng::Purpose::Misc, 0);
    let data = sample(HazardParams::STANDARD, 100_000, &mut rng);
    let ks = pit_statistic(&data, HazardParams::STANDARD).unwrap().ks;
    assert!(ks < K99, "{ks}");
}

#[test]
fn sampler_pit_uniform_over_trials() {
    let par = p(0.5, 0.2, 3.0);
    let mut rejections = 0;
    for t in 0..60 {
        let mut rng = crate::rng::stream(4, crate::rng::Purpose::Misc, t);
        let data = sample(par, 1000, &mut rng);
        if pit_statistic(&data, par).unwrap().ks > K99 {
            rejections += 1;
        }
    }
    // Binomial(60, 0.01): P(X > 3) ≈ 0.003
    assert!(rejections <= 3, "{rejections}");
}

#[test]
fn pit_hand_values() {
    let par = p(0.2, 1.3, 0.8);
    let from_u = |u: f64| quantile_from_exponential(-u.ln(), par).unwrap();
    let data: Vec<f64> = [0.25, 0.5, 0.75].iter().map(|&u| from_u(u)).collect();
    let pit = pit_statistic(&data, par).unwrap();
    assert!((pit.ks - 3f64.sqrt() * 0.25).abs() < 1e-12);
    for (u, want) in pit.uniforms.iter().zip([0.25, 0.5, 0.75]) {
        assert!((u - want).abs() < 1e-13);
    }
    assert!((pit_statistic(&[from_u(0.5)], par).unwrap().ks - 0.5).abs() < 1e-12);
    assert!(pit_statistic(&[], par).is_err());

    let mut buf = Vec::new();
    pit.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("u\n") && text.lines().count() == 4);
}

#[test]
fn pit_known_parameters_below_classical_cutpoint() {
    let par = p(1.0, 0.13, 1.0);
    let mut below = 0;
    for t in 0..200 {
        let mut rng = crate::rng::stream(5, crate::rng::Purpose::Misc, t);
        let data = sample(par, 4902, &mut rng);
        if pit_statistic(&data, par).unwrap().ks < 1.36 {
            below += 1;
        }
    }
    assert!(below >= 190, "{below}");
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = crate::rng::stream(6, crate::rng::Purpose::Misc, 0);
    for _ in 0..20 {
        let truth = p(rng.random_range(-1.0..1.0), rng.random_range(0.2..2.0), rng.random_range(0.3..5.0));
        let data = sample(truth, 200, &mut rng);
        let at = p(truth.mu + rng.random_range(-0.2..0.2), truth.sigma * rng.random_range(0.8..1.25), truth.lambda * rng.random_range(0.8..1.25));
        let g = log_likelihood_gradient(&data, at);
        let h = 1e-6;
        let theta = [at.mu, at.sigma.ln(), at.lambda.ln()];
        for k in 0..3 {
            let shifted = |d: f64| {
                let mut t = theta;
                t[k] += d;
                log_likelihood(&data, HazardParams { mu: t[0], sigma: t[1].exp(), lambda: t[2].exp() })
            };
            let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
            let scale = g[k].abs().max(1.0);
            assert!((fd - g[k]).abs() < 1e-4 * scale, "coord {k}: {fd} vs {}", g[k]);
        }
    }
}

#[test]
fn mle_recovers_standard_member() {
    let mut rng = crate::rng::stream(7, crate::rng::Purpose::Misc, 0);
    let data = sample(HazardParams::STANDARD, 100_000, &mut rng);
    let fit = fit_mle(&data).unwrap();
    let q = fit.params;
    assert!(fit.converged);
    assert!(q.mu.abs() < 0.05 && (q.sigma - 1.0).abs() < 0.05 && (0.85..=1.18).contains(&q.lambda), "{q:?}");
    let g = log_likelihood_gradient(&data, q);
    assert!(g.iter().all(|v| (v / data.len() as f64).abs() <= FIT_GTOL));
    // no start did better than the reported optimum at the truth
    assert!(fit.log_likelihood >= log_likelihood(&data, HazardParams::STANDARD));
}

#[test]
fn mle_equivariance() {
    let mut rng = crate::rng::stream(8, crate::rng::Purpose::Misc, 0);
    let data = sample(p(0.0, 1.0, 1.5), 5000, &mut rng);
    let base = fit_mle(&data).unwrap().params;
    let shifted: Vec<f64> = data.iter().map(|x| x + 2.0).collect();
    let s = fit_mle(&shifted).unwrap().params;
    assert!((s.mu - base.mu - 2.0).abs() < 0.02);
    assert!((s.sigma - base.sigma).abs() < 1e-3 * base.sigma && (s.lambda - base.lambda).abs() < 1e-3 * base.lambda);
    let scaled: Vec<f64> = data.iter().map(|x| x * 3.0).collect();
    let s = fit_mle(&scaled).unwrap().params;
    assert!((s.sigma / base.sigma - 3.0).abs() < 0.15);
    assert!((s.lambda - base.lambda).abs() < 1e-3 * base.lambda);
}

#[test]
fn fixed_lambda_fit() {
    let mut rng = crate::rng::stream(9, crate::rng::Purpose::Misc, 0);
    let truth = p(1.1, 0.13, 1.0);
    let data = sample(truth, 20_000, &mut rng);
    let fit = fit_mle_fixed_lambda(&data, 1.0).unwrap();
    assert!(fit.converged && fit.params.lambda == 1.0);
    assert!((fit.params.mu - 1.1).abs() < 0.01 && (fit.params.sigma - 0.13).abs() < 0.005, "{:?}", fit.params);
    let free = fit_mle(&data).unwrap();
    assert!(free.log_likelihood >= fit.log_likelihood - 1e-9);
    assert!(fit_mle_fixed_lambda(&data, 0.0).is_err());
}

#[test]
fn fit_input_errors() {
    assert!(matches!(fit_mle(&[1.0; 10]), Err(Error::InvalidInput(_))));
    assert!(matches!(fit_mle(&[1.0; 50]), Err(Error::Degenerate(_))));
    let mut bad = vec![0.0; 50];
    bad[3] = f64::NAN;
    bad[4] = 1.0;
    assert!(fit_mle(&bad).is_err());
}

#[test]
fn fit_result_json_round_trip() {
    let fit = FitResult { params: p(0.1, 0.2, 0.3), log_likelihood: -12.5, converged: true, iterations: 17 };
    let text = fit.to_json().to_string();
    let back: FitResult = serde_json::from_str(&text).unwrap();
    assert_eq!(back, fit);
}

#[test]
fn calibration_is_deterministic_and_below_classical() {
    assert!(calibrate_cutpoints(100, 1999, 1).is_err());
    let a = calibrate_cutpoints(60, 2000, 11).unwrap();
    let b = calibrate_cutpoints(60, 2000, 11).unwrap();
    assert_eq!(a, b);
    assert!(a.c05 < 1.36 && a.c05 < a.c01, "{a:?}");
    assert!(a.discarded * 100 < a.n_trials);
}

#[test]
fn scaled_density_is_a_density() {
    for lambda in [0.1f64, 1.0, 10.0] {
        let s = lambda.powf(0.4);
        let total = simpson(|x| scaled_std_density(x, lambda, 0.4), -40.0 / s, (40.0 + 60.0 / lambda) / s, 400_000);
        assert!((total - 1.0).abs() < 1e-8, "{lambda} {total}");
    }
}

proptest! {
    #[test]
    fn quantile_strictly_increasing(e1 in 1e-8f64..50.0, d in 1e-6f64..10.0, lambda in 0.1f64..10.0) {
        let par = p(0.0, 1.0, lambda);
        let y1 = quantile_from_exponential(e1, par).unwrap();
        let y2 = quantile_from_exponential(e1 + d, par).unwrap();
        prop_assert!(y1 < y2);
    }

    #[test]
    fn cox_composition(x in -10.0f64..10.0, l1 in 0.05f64..5.0, l2 in 0.05f64..5.0, mu in -1.0f64..1.0, sigma in 0.1f64..3.0) {
        let lhs = tail(x, p(mu, sigma, l1)) * tail(x, p(mu, sigma, l2));
        let rhs = tail(x, p(mu, sigma, l1 + l2));
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }
}
