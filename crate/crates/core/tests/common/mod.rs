#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use strucox_core::basis::DesignExpansion;
use strucox_core::linalg::Matrix;
use strucox_core::survival::{CovariateBounds, SurvivalDataset, SurvivalRecord};

pub fn design(rows: &[Vec<f64>], p: usize, d: usize) -> DesignExpansion {
    DesignExpansion::from_matrix(Matrix::from_rows(rows).unwrap(), p, d).unwrap()
}

/// Dataset with the given times and event flags; raw covariates are unused
/// placeholders because the tests supply the design directly.
pub fn dataset(times: &[f64], events: &[bool]) -> SurvivalDataset {
    let recs = times
        .iter()
        .zip(events)
        .map(|(&t, &e)| SurvivalRecord::new(t, e, vec![0.5]))
        .collect();
    SurvivalDataset::new(recs, CovariateBounds::default(), None).unwrap()
}

/// Random tie-free instance with design entries in `[-1, 1]` and at least
/// one event.
pub fn random_instance(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> (DesignExpansion, SurvivalDataset) {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let times: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..10.0)).collect();
    let mut events: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.7).collect();
    events[0] = true;
    (design(&rows, dim, 1), dataset(&times, &events))
}

/// Random instance where subjects share event times in blocks.
pub fn random_tied_instance(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> (DesignExpansion, SurvivalDataset) {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let times: Vec<f64> = (0..n).map(|_| rng.random_range(1..5) as f64).collect();
    let mut events: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.7).collect();
    events[0] = true;
    (design(&rows, dim, 1), dataset(&times, &events))
}

/// Minimum of a convex function of `dim <= 3` variables on `[-2, 2]^dim`:
/// a 0.01 grid followed by a 0.001 grid on a window around the coarse
/// minimizer.
pub fn grid_min(dim: usize, f: impl Fn(&[f64]) -> f64) -> (f64, Vec<f64>) {
    let scan = |center: &[f64], half: f64, step: f64| {
        let k = (2.0 * half / step).round() as i64;
        let mut best = (f64::INFINITY, vec![0.0; dim]);
        let mut idx = vec![0i64; dim];
        let mut x = vec![0.0; dim];
        loop {
            for c in 0..dim {
                x[c] = (center[c] - half + idx[c] as f64 * step).clamp(-2.0, 2.0);
            }
            let v = f(&x);
            if v < best.0 {
                best = (v, x.clone());
            }
            let mut c = 0;
            loop {
                if c == dim {
                    return best;
                }
                idx[c] += 1;
                if idx[c] <= k {
                    break;
                }
                idx[c] = 0;
                c += 1;
            }
        }
    };
    let coarse = scan(&vec![0.0; dim], 2.0, 0.01);
    scan(&coarse.1, 0.02, 0.001)
}
