use super::Strategy as Route;
use super::*;
use crate::geometry::{sample_uniform, Point2};
use crate::rng::{stream, Purpose};
use proptest::prelude::*;

fn plane(pts: &[(f64, f64)]) -> PointSet {
    PointSet::new(pts.iter().map(|&(x, y)| Point2::new(x, y)).collect(), Metric::EuclideanSquared).unwrap()
}

fn random_pair(seed: u64, n: usize, metric: Metric) -> (PointSet, PointSet) {
    let mut rng = stream(seed, Purpose::Misc, n as u64);
    (sample_uniform(n, metric, &mut rng).unwrap(), sample_uniform(n, metric, &mut rng).unwrap())
}

#[test]
fn single_pair() {
    let m = solve_exact(&plane(&[(0.2, 0.3)]), &plane(&[(0.5, 0.7)])).unwrap();
    assert_eq!(m.permutation, vec![0]);
    assert!((m.total_cost - 0.25).abs() < 1e-15);
    assert!(m.optimal);
    let b = brute_force(&plane(&[(0.2, 0.3)]), &plane(&[(0.5, 0.7)])).unwrap();
    assert_eq!(b.total_cost, m.total_cost);
}

#[test]
fn identical_sets_cost_zero() {
    let (a, _) = random_pair(1, 40, Metric::ToroidalSquared);
    assert_eq!(solve_exact(&a, &a).unwrap().total_cost, 0.0);
}

#[test]
fn input_errors() {
    let a = plane(&[(0.1, 0.1), (0.2, 0.2)]);
    let b = plane(&[(0.1, 0.1)]);
    assert!(matches!(solve_exact(&a, &b), Err(Error::InvalidInput(_))));
    let t = a.with_metric(Metric::ToroidalSquared).unwrap();
    assert!(matches!(solve_exact(&a, &t), Err(Error::InvalidInput(_))));
    let (l, r) = random_pair(2, 10, Metric::EuclideanSquared);
    assert!(matches!(brute_force(&l, &r), Err(Error::TooLarge(10))));
}

#[test]
fn brute_force_finds_the_swap() {
    let l = plane(&[(0.0, 0.0), (1.0, 1.0)]);
    let r = plane(&[(1.0, 1.0), (0.0, 0.0)]);
    let m = brute_force(&l, &r).unwrap();
    assert_eq!(m.permutation, vec![1, 0]);
    assert_eq!(m.total_cost, 0.0);
    assert!(m.duals_a.is_empty() && m.duals_b.is_empty());
}

#[test]
fn brute_force_is_minimal_over_all_six_permutations() {
    let (l, r) = random_pair(3, 3, Metric::EuclideanSquared);
    let best = brute_force(&l, &r).unwrap().total_cost;
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    for p in perms {
        assert!(best <= matched_cost(l.points(), r.points(), &p, Metric::EuclideanSquared));
    }
}

#[test]
fn exact_matches_brute_force() {
    for metric in [Metric::EuclideanSquared, Metric::ToroidalSquared] {
        for seed in 0..200u64 {
            let n = 2 + (seed as usize % 6);
            let (l, r) = random_pair(seed, n, metric);
            let e = solve_exact(&l, &r).unwrap();
            let b = brute_force(&l, &r).unwrap();
            assert!((e.total_cost - b.total_cost).abs() <= 1e-12, "seed {seed}");
        }
    }
}

#[test]
fn exact_duals_certify_optimality() {
    for (seed, n) in [(1, 16), (2, 64), (3, 256), (4, 1100)] {
        for metric in [Metric::EuclideanSquared, Metric::ToroidalSquared] {
            let (l, r) = random_pair(seed, n, metric);
            let m = solve_exact(&l, &r).unwrap();
            let rep = verify_duals(&l, &r, &m).unwrap();
            assert!(rep.feasible && rep.max_violation <= 1e-9, "{rep:?}");
            assert!(rep.slack_on_matched <= 1e-9, "{rep:?}");
            let min = m.duals_a.iter().chain(&m.duals_b).copied().fold(f64::INFINITY, f64::min);
            assert_eq!(min, 0.0);
            let dual_sum: f64 = (0..n).map(|i| m.duals_b[m.permutation[i]] - m.duals_a[i]).sum();
            assert!((dual_sum - m.total_cost).abs() <= 1e-6 * m.total_cost);
        }
    }
}

#[test]
fn zero_duals_are_feasible() {
    let (l, r) = random_pair(5, 8, Metric::EuclideanSquared);
    let mut m = brute_force(&l, &r).unwrap();
    m.duals_a = vec![0.0; 8];
    m.duals_b = vec![0.0; 8];
    let rep = verify_duals(&l, &r, &m).unwrap();
    assert!(rep.feasible);
    let max_matched = (0..8)
        .map(|i| Metric::EuclideanSquared.eval(l.points()[i], r.points()[m.permutation[i]]))
        .fold(0.0, f64::max);
    assert_eq!(rep.slack_on_matched, max_matched);
}

#[test]
fn inflated_dual_is_infeasible() {
    let (l, r) = random_pair(6, 12, Metric::EuclideanSquared);
    let mut m = solve_exact(&l, &r).unwrap();
    m.duals_b[3] += 1.0;
    let rep = verify_duals(&l, &r, &m).unwrap();
    assert!(!rep.feasible);
    assert!(rep.max_violation > 0.5);

    m.duals_a.clear();
    assert!(matches!(verify_duals(&l, &r, &m), Err(Error::InvalidInput(_))));
}

#[test]
fn candidate_graph_agrees_with_dense() {
    for metric in [Metric::EuclideanSquared, Metric::ToroidalSquared] {
        for (seed, n) in [(1u64, 3usize), (2, 30), (3, 200), (4, 700)] {
            let (l, r) = random_pair(seed, n, metric);
            let a = solve_exact_with(&l, &r, Route::Dense).unwrap();
            let b = solve_exact_with(&l, &r, Route::Candidates).unwrap();
            assert!((a.total_cost - b.total_cost).abs() <= 1e-12 * a.total_cost.max(1.0), "{metric:?} n={n}");
            let rep = verify_duals(&l, &r, &b).unwrap();
            assert!(rep.feasible && rep.slack_on_matched <= 1e-9, "{rep:?}");
        }
    }
    // clustered normal sample stresses the repair loop
    let mut rng = stream(5, Purpose::Misc, 0);
    let l = crate::geometry::sample(crate::geometry::SampleKind::StandardNormalPlane, 300, &mut rng).unwrap();
    let r = crate::geometry::sample(crate::geometry::SampleKind::StandardNormalPlane, 300, &mut rng).unwrap();
    let a = solve_exact_with(&l, &r, Route::Dense).unwrap();
    let b = solve_exact_with(&l, &r, Route::Candidates).unwrap();
    assert!((a.total_cost - b.total_cost).abs() <= 1e-12 * a.total_cost);
}

#[test]
fn lazy_and_dense_agree() {
    // n above DENSE_LIMIT goes through on-demand costs
    let (l, r) = random_pair(9, DENSE_LIMIT + 1, Metric::ToroidalSquared);
    let lazy = solve_exact_with(&l, &r, Route::Dense).unwrap();
    let (lp, rp) = (l.points(), r.points());
    let dense = lapjv::solve(&DenseCost::from_fn(lp.len(), |i, j| Metric::ToroidalSquared.eval(lp[i], rp[j])));
    let dense_cost = matched_cost(lp, rp, &dense.row_to_col, Metric::ToroidalSquared);
    assert!((lazy.total_cost - dense_cost).abs() < 1e-12);
}

#[test]
fn two_swap_fixes_crossed_pair() {
    let l = plane(&[(0.0, 0.0), (1.0, 1.0)]);
    let r = plane(&[(1.0, 1.0), (0.0, 0.0)]);
    let start = Matching::from_permutation(&l, &r, vec![0, 1]).unwrap();
    assert_eq!(start.total_cost, 4.0);
    let out = improve_two_swap(&l, &r, &start).unwrap();
    assert_eq!(out.permutation, vec![1, 0]);
    assert_eq!(out.total_cost, 0.0);
}

#[test]
fn two_swap_leaves_optimum_alone() {
    let (l, r) = random_pair(7, 50, Metric::EuclideanSquared);
    let m = solve_exact(&l, &r).unwrap();
    let out = improve_two_swap(&l, &r, &m).unwrap();
    assert_eq!(out.total_cost, m.total_cost);
}

#[test]
fn matching_json_shape() {
    let (l, r) = random_pair(8, 5, Metric::ToroidalSquared);
    let v = solve_exact(&l, &r).unwrap().to_json();
    assert_eq!(v["n"], 5);
    assert_eq!(v["metric"], "torus");
    assert_eq!(v["permutation"].as_array().unwrap().len(), 5);
    assert_eq!(v["duals_a"].as_array().unwrap().len(), 5);
    assert!(v["total_cost"].as_f64().unwrap() > 0.0);
    assert_eq!(round_sig(1.234_567_890_123_456, 12), 1.234_567_890_12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn permuting_right_points_keeps_cost(seed in any::<u64>(), n in 2usize..40) {
        let (l, r) = random_pair(seed, n, Metric::EuclideanSquared);
        let base = solve_exact(&l, &r).unwrap();
        let mut pts = r.points().to_vec();
        pts.reverse();
        pts.rotate_left(seed as usize % n);
        let shuffled = PointSet::new(pts, Metric::EuclideanSquared).unwrap();
        let other = solve_exact(&l, &shuffled).unwrap();
        prop_assert!((base.total_cost - other.total_cost).abs() <= 1e-12);
    }

    #[test]
    fn scaling_multiplies_cost_by_square(seed in any::<u64>(), n in 2usize..40, s in 0.1f64..10.0) {
        let (l, r) = random_pair(seed, n, Metric::EuclideanSquared);
        let scale = |ps: &PointSet| PointSet::new(
            ps.points().iter().map(|p| Point2::new(p.x * s, p.y * s)).collect(),
            Metric::EuclideanSquared,
        ).unwrap();
        let base = solve_exact(&l, &r).unwrap().total_cost;
        let scaled = solve_exact(&scale(&l), &scale(&r)).unwrap().total_cost;
        prop_assert!((scaled - s * s * base).abs() <= 1e-9 * scaled);
    }

    #[test]
    fn two_swap_never_increases_cost_and_is_two_opt(seed in any::<u64>(), n in 2usize..30) {
        let (l, r) = random_pair(seed, n, Metric::EuclideanSquared);
        let start = Matching::from_permutation(&l, &r, (0..n).collect()).unwrap();
        let out = improve_two_swap(&l, &r, &start).unwrap();
        prop_assert!(out.total_cost <= start.total_cost + 1e-12);
        let (lp, rp, p) = (l.points(), r.points(), &out.permutation);
        let c = |i: usize, j: usize| Metric::EuclideanSquared.eval(lp[i], rp[j]);
        for i in 0..n {
            for k in i + 1..n {
                prop_assert!(c(i, p[k]) + c(k, p[i]) - c(i, p[i]) - c(k, p[k]) >= -SWAP_GAIN_TOL);
            }
        }
    }
}
