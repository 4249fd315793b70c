use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};
use crate::linalg::dot;
use crate::penalty::{Exponent, PenaltySpec};
use crate::rng::{stream_rng, streams};

/// Outcome of the penalty threshold check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Report {
    /// `||v_j||_{gamma_j*} <= lambda_j |G_j|^{1/gamma_j*} rho'(0+)` per group.
    pub events: Vec<bool>,
    pub all_events_hold: bool,
    pub samples: usize,
    /// Samples with `f(x) < f(0)`, `f(x) = lambda P(x) - (x - beta*)^T v`.
    pub violations: usize,
    /// `min_x f(x) - f(0)` over the samples and directional search.
    pub min_gap: f64,
    pub violating_x: Option<Vec<f64>>,
    pub violating_group: Option<usize>,
}

/// A unit vector (in the `gamma` norm) attaining `<x, v> = ||v||_{gamma*}`.
fn dual_direction(gamma: Exponent, v: &[f64]) -> Vec<f64> {
    let mut x = match gamma {
        Exponent::Infinity => v.iter().map(|a| a.signum()).collect(),
        Exponent::Finite(g) if g == 1.0 => {
            let k = v
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .map_or(0, |(k, _)| k);
            let mut e = vec![0.0; v.len()];
            e[k] = v[k].signum();
            e
        }
        Exponent::Finite(g) => {
            let q = g / (g - 1.0);
            v.iter()
                .map(|a| a.signum() * libm::pow(a.abs(), q - 1.0))
                .collect()
        }
    };
    let n = gamma.norm(&x);
    if n > 0.0 {
        x.iter_mut().for_each(|a| *a /= n);
    }
    x
}

/// Checks `lambda P(x) - (x - beta*)^T v >= beta*^T v` over random `x` and
/// along each group's dual direction of `v` at scales `1e-6 .. 1e6`.
pub fn check_lemma1(
    spec: &PenaltySpec,
    beta_star: &[f64],
    v: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<Lemma1Report> {
    check_len(spec.dim(), beta_star.len())?;
    check_len(spec.dim(), v.len())?;
    let groups = spec.groups().len();
    let events: Vec<bool> = (0..groups).map(|j| spec.threshold_event(v, j)).collect();
    let all_events_hold = events.iter().all(|&e| e);
    let f0 = dot(beta_star, v);
    let f = |x: &[f64]| -> Result<f64> {
        let shifted: f64 = x.iter().zip(beta_star).zip(v).map(|((a, b), c)| (a - b) * c).sum();
        Ok(spec.weighted_penalty(x)? - shifted)
    };
    let tol = |x: &[f64]| 1e-12 * (1.0 + libm::sqrt(dot(x, x)) * libm::sqrt(dot(v, v)) + f0.abs());

    let mut samples = 0;
    let mut violations = 0;
    let mut min_gap = f64::INFINITY;
    let mut violating_x = None;
    let mut violating_group = None;
    let mut record = |x: Vec<f64>, group: Option<usize>, samples: &mut usize| -> Result<()> {
        *samples += 1;
        let gap = f(&x)? - f0;
        if gap < -tol(&x) {
            violations += 1;
            if violating_x.is_none() || gap < min_gap {
                violating_group = group;
                violating_x = Some(x.clone());
            }
        }
        min_gap = min_gap.min(gap);
        Ok(())
    };

    let dim = spec.dim();
    for j in 0..groups {
        let block = spec.block(v, j);
        let dir = dual_direction(spec.gamma(j), &block);
        for k in -12..=12 {
            let t = libm::pow(10.0, k as f64 / 2.0);
            let mut x = vec![0.0; dim];
            for (&c, d) in spec.groups().group(j).iter().zip(&dir) {
                x[c] = t * d;
            }
            record(x, Some(j), &mut samples)?;
        }
    }
    let mut rng = stream_rng(seed, streams::DIRECTIONS);
    for _ in 0..n_samples {
        let scale = libm::pow(10.0, rng.random_range(-3.0..3.0));
        let sparse = rng.random::<f64>() < 0.5;
        let keep = rng.random_range(0..groups.max(1));
        let mut x = vec![0.0; dim];
        for j in 0..groups {
            if sparse && j != keep {
                continue;
            }
            for &c in spec.groups().group(j) {
                x[c] = scale * rng.sample::<f64, _>(StandardNormal);
            }
        }
        record(x, None, &mut samples)?;
    }

    Ok(Lemma1Report {
        events,
        all_events_hold,
        samples,
        violations,
        min_gap,
        violating_x,
        violating_group,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_v_holds() {
        let spec = PenaltySpec::group_lasso(3, 2, 0.5).unwrap();
        let r = check_lemma1(&spec, &[0.1; 6], &[0.0; 6], 1000, 1).unwrap();
        assert!(r.all_events_hold);
        assert_eq!(r.violations, 0);
    }

    #[test]
    fn dual_direction_attains_dual_norm() {
        let v = [0.3, -1.2, 0.5];
        for g in [Exponent::ONE, Exponent::TWO, Exponent::INF, Exponent::new(3.0).unwrap()] {
            let x = dual_direction(g, &v);
            assert!((g.norm(&x) - 1.0).abs() < 1e-12);
            assert!((dot(&x, &v) - g.conjugate().norm(&v)).abs() < 1e-12);
        }
    }
}
