mod common;

use common::{dataset, design, random_instance, random_tied_instance};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use strucox_core::likelihood::PartialLikelihood;
use strucox_core::rng::stream_rng;

/// Breslow log partial likelihood written out as a double loop.
fn naive(rows: &[Vec<f64>], times: &[f64], events: &[bool], b: &[f64]) -> f64 {
    let eta: Vec<f64> = rows.iter().map(|r| r.iter().zip(b).map(|(x, y)| x * y).sum()).collect();
    let n = rows.len() as f64;
    let mut total = 0.0;
    for i in 0..rows.len() {
        if !events[i] {
            continue;
        }
        let s: f64 = (0..rows.len())
            .filter(|&k| times[k] >= times[i])
            .map(|k| eta[k].exp())
            .sum();
        total += eta[i] - (s / n).ln();
    }
    total / n
}

fn rows_of(x: &strucox_core::basis::DesignExpansion) -> Vec<Vec<f64>> {
    (0..x.n()).map(|i| x.row(i).to_vec()).collect()
}

#[test]
fn matches_double_loop_with_ties() {
    let mut rng = stream_rng(21, 1);
    for _ in 0..20 {
        let (x, ds) = random_tied_instance(&mut rng, 15, 3);
        let lik = PartialLikelihood::new(&x, &ds).unwrap();
        let times: Vec<f64> = ds.records().iter().map(|r| r.time).collect();
        let events: Vec<bool> = ds.records().iter().map(|r| r.event).collect();
        let b = [0.3, -1.1, 0.7];
        let v = lik.log_likelihood(&b).unwrap();
        assert!((v - naive(&rows_of(&x), &times, &events, &b)).abs() < 1e-12);
    }
}

#[test]
fn score_and_hessian_match_finite_differences() {
    let mut rng = stream_rng(22, 1);
    for _ in 0..10 {
        let (x, ds) = random_tied_instance(&mut rng, 20, 4);
        let lik = PartialLikelihood::new(&x, &ds).unwrap();
        let b = [0.2, -0.4, 0.9, 0.1];
        let (_, g) = lik.value_and_score(&b).unwrap();
        let h = lik.hessian(&b).unwrap();
        let e = 1e-5;
        for k in 0..4 {
            let mut up = b;
            let mut dn = b;
            up[k] += e;
            dn[k] -= e;
            let fd = (lik.log_likelihood(&up).unwrap() - lik.log_likelihood(&dn).unwrap()) / (2.0 * e);
            assert!((fd - g[k]).abs() < 1e-8, "score {k}: {fd} vs {}", g[k]);
            let gu = lik.score(&up).unwrap();
            let gd = lik.score(&dn).unwrap();
            for c in 0..4 {
                // The Hessian of L_n is negative semidefinite; `hessian` returns its negation.
                let fd = -(gu[c] - gd[c]) / (2.0 * e);
                assert!((fd - h.row(k)[c]).abs() < 1e-7, "hessian {k},{c}");
            }
        }
        assert!(h.min_eigenvalue() >= -1e-12);
    }
}

#[test]
fn stable_for_large_predictors() {
    let x = design(&[vec![400.0], vec![-400.0], vec![0.0]], 1, 1);
    let ds = dataset(&[1.0, 2.0, 3.0], &[true, true, true]);
    let lik = PartialLikelihood::new(&x, &ds).unwrap();
    let (v, g) = lik.value_and_score(&[2.0]).unwrap();
    assert!(v.is_finite() && g[0].is_finite());
}

#[test]
fn separating_directions() {
    let x = design(&[vec![1.0], vec![0.5], vec![0.0]], 1, 1);
    let ds = dataset(&[1.0, 2.0, 3.0], &[true, true, true]);
    let lik = PartialLikelihood::new(&x, &ds).unwrap();
    assert!(lik.separating_direction(&[1.0]).unwrap());
    assert!(!lik.separating_direction(&[-1.0]).unwrap());
    assert!(!lik.separating_direction(&[0.0]).unwrap());
    let mixed = dataset(&[2.0, 1.0, 3.0], &[true, true, true]);
    let lik = PartialLikelihood::new(&x, &mixed).unwrap();
    assert!(!lik.separating_direction(&[1.0]).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn invariant_to_row_order_and_shift(seed in any::<u64>(), shift in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, ds) = random_tied_instance(&mut rng, 12, 2);
        let rows = rows_of(&x);
        let times: Vec<f64> = ds.records().iter().map(|r| r.time).collect();
        let events: Vec<bool> = ds.records().iter().map(|r| r.event).collect();
        let b = [0.5, -0.8];
        let base = PartialLikelihood::new(&x, &ds).unwrap().log_likelihood(&b).unwrap();

        let perm: Vec<usize> = (0..12).rev().collect();
        let prow: Vec<Vec<f64>> = perm.iter().map(|&i| rows[i].clone()).collect();
        let pt: Vec<f64> = perm.iter().map(|&i| times[i]).collect();
        let pe: Vec<bool> = perm.iter().map(|&i| events[i]).collect();
        let (px, pds) = (design(&prow, 2, 1), dataset(&pt, &pe));
        let permuted = PartialLikelihood::new(&px, &pds).unwrap().log_likelihood(&b).unwrap();
        prop_assert!((base - permuted).abs() < 1e-12);

        let srow: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v + shift).collect()).collect();
        let sx = design(&srow, 2, 1);
        let shifted = PartialLikelihood::new(&sx, &ds).unwrap().log_likelihood(&b).unwrap();
        prop_assert!((base - shifted).abs() < 1e-10);
    }

    #[test]
    fn concave(seed in any::<u64>(), t in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, ds) = random_instance(&mut rng, 10, 3);
        let lik = PartialLikelihood::new(&x, &ds).unwrap();
        let a = [1.0, -0.5, 0.2];
        let b = [-0.3, 0.8, 1.5];
        let mid: Vec<f64> = a.iter().zip(&b).map(|(u, v)| t * u + (1.0 - t) * v).collect();
        let lhs = lik.log_likelihood(&mid).unwrap();
        let rhs = t * lik.log_likelihood(&a).unwrap() + (1.0 - t) * lik.log_likelihood(&b).unwrap();
        prop_assert!(lhs >= rhs - 1e-12);
    }
}
