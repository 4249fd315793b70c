mod common;

use common::{dataset, design, random_instance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use strucox_core::likelihood::PartialLikelihood;
use strucox_core::linalg::Matrix;
use strucox_core::penalty::{Exponent, PenaltySpec};
use strucox_core::rng::stream_rng;
use strucox_core::theory::{
    check_lemma1, check_sandwich, estimate_re_constant, estimate_re_from_matrix, min_weight_prop1,
    sample_omega_lower, solve_v_constants, subject_weight, Cone,
};

#[test]
fn prop1_matches_dense_grid() {
    let mut rng = stream_rng(31, 1);
    for _ in 0..20 {
        let (x, ds) = random_instance(&mut rng, 3, 1);
        let i = 0;
        let r = min_weight_prop1(&x, &ds, i, 4.0, 7).unwrap();
        let mut grid = f64::INFINITY;
        for k in 0..=4000 {
            let b = -2.0 + k as f64 * 1e-3;
            grid = grid.min(subject_weight(&x, &ds, i, &[b]).unwrap().0);
        }
        assert!((r.numeric_min - grid).abs() < 1e-4, "{} vs {grid}", r.numeric_min);
        assert!(r.numeric_min <= r.value_at_zero);
    }
}

#[test]
fn prop1_single_subject_and_equal_rows() {
    let x = design(&[vec![0.7]], 1, 1);
    let ds = dataset(&[1.0], &[true]);
    assert_eq!(min_weight_prop1(&x, &ds, 0, 4.0, 1).unwrap().numeric_min, 1.0);

    let x = design(&vec![vec![0.3, 0.1]; 4], 2, 1);
    let ds = dataset(&[1.0, 2.0, 3.0, 4.0], &[true, true, false, true]);
    let r = min_weight_prop1(&x, &ds, 3, 9.0, 1).unwrap();
    assert!((r.numeric_min - r.value_at_zero).abs() < 1e-12);
}

fn lemma1_setup(scale_all: f64, boost: Option<(usize, f64)>) -> (PenaltySpec, Vec<f64>, Vec<f64>) {
    let spec = PenaltySpec::uniform(3, 2, Exponent::TWO, 0.3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut v: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
    for j in 0..3 {
        let factor = match boost {
            Some((g, f)) if g == j => f,
            _ => scale_all,
        };
        let s = factor * spec.threshold(j) / spec.dual_block_norm(&v, j);
        for &c in spec.groups().group(j) {
            v[c] *= s;
        }
    }
    let beta_star = vec![0.5, -0.2, 0.0, 0.0, 1.0, 0.3];
    (spec, beta_star, v)
}

#[test]
fn lemma1_holds_below_thresholds() {
    let (spec, beta_star, v) = lemma1_setup(0.9, None);
    let r = check_lemma1(&spec, &beta_star, &v, 10_000, 1).unwrap();
    assert!(r.all_events_hold);
    assert_eq!(r.violations, 0);
    assert!(r.min_gap >= -1e-12);
}

#[test]
fn lemma1_violated_above_threshold() {
    let (spec, beta_star, v) = lemma1_setup(0.9, Some((1, 1.5)));
    let r = check_lemma1(&spec, &beta_star, &v, 10_000, 1).unwrap();
    assert_eq!(r.events, vec![true, false, true]);
    assert!(r.violations > 0);
    assert_eq!(r.violating_group, Some(1));
    let x = r.violating_x.unwrap();
    let shifted: f64 = x.iter().zip(&beta_star).zip(&v).map(|((a, b), c)| (a - b) * c).sum();
    let f0: f64 = beta_star.iter().zip(&v).map(|(a, b)| a * b).sum();
    assert!(spec.weighted_penalty(&x).unwrap() - shifted < f0);
}

#[test]
fn re_identity_and_zero_matrix() {
    let spec = PenaltySpec::group_lasso(3, 2, 1.0).unwrap();
    let r = estimate_re_from_matrix(&Matrix::identity(6), &[0], &spec, 7.0, 2000, 1).unwrap();
    assert!((r.zeta_sq - 1.0).abs() < 1e-12);
    let cone = Cone::new(&spec, &[0], 7.0).unwrap();
    assert!(cone.contains(&r.min_direction));
    let z = estimate_re_from_matrix(&Matrix::zeros(6, 6), &[0], &spec, 7.0, 100, 1).unwrap();
    assert_eq!(z.zeta_hat, 0.0);
    assert!(z.degenerate);
}

#[test]
fn re_more_samples_never_increase() {
    let mut rng = stream_rng(32, 1);
    let (x, ds) = random_instance(&mut rng, 40, 6);
    let spec = PenaltySpec::uniform(3, 2, Exponent::TWO, 1.0).unwrap();
    let x = design(&(0..40).map(|i| x.row(i).to_vec()).collect::<Vec<_>>(), 3, 2);
    let beta = [0.5, 0.2, 0.0, 0.0, 0.0, 0.0];
    let few = estimate_re_constant(&x, &ds, &beta, &[0], &spec, 7.0, 100, 4).unwrap();
    let many = estimate_re_constant(&x, &ds, &beta, &[0], &spec, 7.0, 2000, 4).unwrap();
    assert!(many.zeta_hat <= few.zeta_hat);
    assert!(Cone::new(&spec, &[0], 7.0).unwrap().contains(&many.min_direction));
}

#[test]
fn re_duplicated_column_is_flagged() {
    let mut rng = stream_rng(33, 1);
    let n = 40;
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let a: f64 = rng.random_range(-1.0..1.0);
            vec![a, rng.random_range(-1.0..1.0), a, rng.random_range(-1.0..1.0)]
        })
        .collect();
    let times: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..5.0)).collect();
    let events = vec![true; n];
    let x = design(&rows, 4, 1);
    let ds = dataset(&times, &events);
    let spec = PenaltySpec::group_lasso(4, 1, 1.0).unwrap();
    let r = estimate_re_constant(&x, &ds, &[0.0; 4], &[0], &spec, 7.0, 500, 1).unwrap();
    assert!(r.zeta_hat < 1e-6);
    assert!(r.degenerate);
}

#[test]
fn sampled_weight_bound_dominates_ball_minimum() {
    let mut rng = stream_rng(34, 1);
    let (x, ds) = random_instance(&mut rng, 8, 2);
    let spec = PenaltySpec::group_lasso(2, 1, 1.0).unwrap();
    let beta = [0.4, 0.0];
    let cone = Cone::new(&spec, &[0], 7.0).unwrap();
    let c_grid: Vec<f64> = (1..10).map(|k| k as f64 / 10.0).collect();
    let est = sample_omega_lower(&x, &ds, &beta, &cone, 1.0, 1000, &c_grid, 2).unwrap();
    let lik = PartialLikelihood::new(&x, &ds).unwrap();
    let at_risk: Vec<usize> = (0..8)
        .filter(|&i| ds.risk_sets().last_at_risk(i).is_some())
        .collect();
    let ball = at_risk
        .iter()
        .map(|&i| min_weight_prop1(&x, &ds, i, est.enclosing_ball_sq, 3).unwrap().numeric_min)
        .fold(f64::INFINITY, f64::min);
    assert!(est.omega_lower >= ball - 1e-9, "{} < {ball}", est.omega_lower);
    assert!(est.omega_lower <= lik.observation_weights(&beta).unwrap().lower + 1e-12);
}

#[test]
fn sandwich_random_instances() {
    let mut rng = stream_rng(35, 1);
    let c_grid: Vec<f64> = (1..10).map(|k| k as f64 / 10.0).collect();
    for _ in 0..100 {
        let n = rng.random_range(5..=30);
        let dim = rng.random_range(1..=8);
        let (x, ds) = random_instance(&mut rng, n, dim);
        let b: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let bs: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = check_sandwich(&x, &ds, &b, &bs, &c_grid).unwrap();
        assert!(r.entries.iter().all(|e| e.upper_pass));
        let doubled: Vec<f64> = b.iter().zip(&bs).map(|(a, s)| s + 2.0 * (a - s)).collect();
        let r2 = check_sandwich(&x, &ds, &doubled, &bs, &c_grid).unwrap();
        assert!((r2.a_v - 2.0 * r.a_v).abs() <= 1e-12 * r.a_v.max(1.0));
    }
    let (x, ds) = random_instance(&mut rng, 10, 3);
    let same = check_sandwich(&x, &ds, &[0.3; 3], &[0.3; 3], &c_grid).unwrap();
    assert!(same.entries.iter().all(|e| e.lower == 0.0 && e.middle == 0.0 && e.upper == 0.0));
}

#[test]
fn sandwich_lower_side_fails_for_constant_shift() {
    // b - beta* along a constant column: f is constant, its weighted
    // variance is 0 but the lower side is positive.
    let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![1.0, i as f64 / 6.0]).collect();
    let x = design(&rows, 2, 1);
    let ds = dataset(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[true; 6]);
    let r = check_sandwich(&x, &ds, &[1.0, 0.0], &[0.0, 0.0], &[0.5]).unwrap();
    let e = r.entries[0];
    assert!(e.middle.abs() < 1e-12);
    assert!(e.lower > 0.0);
    assert!(!e.lower_pass);
    assert!(!r.pass);
}

#[test]
fn v1_certificate() {
    for rhs in [0.01, 0.05, 0.1, 0.15] {
        let lambda = (rhs / 16.0f64).sqrt();
        let r = solve_v_constants(lambda, 1.0, 1.0, 1.0, 1.0).unwrap();
        let v = r.v1.value.unwrap();
        assert!(v * (-2.0 * v).exp() - rhs <= 1e-10);
        assert!(r.v1.certified);
    }
}
