use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::cone::{rho_inverse, Cone};
use crate::basis::DesignExpansion;
use crate::error::{check_len, invalid, Result};
use crate::likelihood::PartialLikelihood;
use crate::linalg::Matrix;
use crate::penalty::PenaltySpec;
use crate::rng::{stream_rng, streams};
use crate::survival::SurvivalDataset;

/// Below this the estimate is flagged as degenerate.
const DEGENERATE_ZETA: f64 = 1e-6;
/// Cap on the number of support/off-support coordinate pairs tried.
const MAX_PAIRS: usize = 200_000;

/// Sampled restricted-eigenvalue constant. The true constant is at most
/// `zeta_hat`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct REEstimate {
    pub zeta_hat: f64,
    pub zeta_sq: f64,
    pub mu: f64,
    /// Directions evaluated (coordinates, pairs and random draws).
    pub samples: usize,
    /// Directions skipped for a zero denominator.
    pub skipped: usize,
    pub min_direction: Vec<f64>,
    pub degenerate: bool,
}

/// Estimates `zeta` at `beta_star` with the negative Hessian of the partial
/// likelihood.
pub fn estimate_re_constant(
    design: &DesignExpansion,
    ds: &SurvivalDataset,
    beta_star: &[f64],
    support: &[usize],
    spec: &PenaltySpec,
    mu: f64,
    n_samples: usize,
    seed: u64,
) -> Result<REEstimate> {
    let lik = PartialLikelihood::new(design, ds)?;
    let h = lik.hessian(beta_star)?;
    estimate_re_from_matrix(&h, support, spec, mu, n_samples, seed)
}

/// Minimum of `x^T H x / sum_{j in M} rho(||x_j||)^2` over cone members:
/// support coordinates, the best support/off-support coordinate pairs and
/// `n_samples` random members, in that order.
pub fn estimate_re_from_matrix(
    h: &Matrix,
    support: &[usize],
    spec: &PenaltySpec,
    mu: f64,
    n_samples: usize,
    seed: u64,
) -> Result<REEstimate> {
    check_len(spec.dim(), h.rows())?;
    check_len(spec.dim(), h.cols())?;
    let cone = Cone::new(spec, support, mu)?;
    let mut best = f64::INFINITY;
    let mut best_x = Vec::new();
    let mut samples = 0;
    let mut skipped = 0;
    let mut consider = |x: &[f64], best: &mut f64, best_x: &mut Vec<f64>| {
        let den: f64 = support
            .iter()
            .map(|&j| {
                let r = spec.rho.value(spec.group_norm(x, j));
                r * r
            })
            .sum();
        if !(den > 0.0) {
            skipped += 1;
            return;
        }
        samples += 1;
        let ratio = h.quadratic_form(x) / den;
        if ratio < *best {
            *best = ratio;
            *best_x = x.to_vec();
        }
    };

    let dim = spec.dim();
    let on_coords: Vec<usize> = support
        .iter()
        .flat_map(|&j| spec.groups().group(j).iter().copied())
        .collect();
    let mut off_coords: Vec<(usize, usize)> = Vec::new();
    for j in 0..spec.groups().len() {
        if !cone.on_support(j) {
            off_coords.extend(spec.groups().group(j).iter().map(|&c| (c, j)));
        }
    }
    let group_of = |c: usize| {
        support
            .iter()
            .copied()
            .find(|&j| spec.groups().group(j).contains(&c))
            .unwrap_or(0)
    };

    let mut x = vec![0.0; dim];
    for &k in &on_coords {
        x[k] = 1.0;
        consider(&x, &mut best, &mut best_x);
        x[k] = 0.0;
    }
    if on_coords.len() * off_coords.len() <= MAX_PAIRS {
        for &k in &on_coords {
            let on = cone.group_penalty(&unit(dim, k), group_of(k));
            for &(c, j) in &off_coords {
                let hcc = h[(c, c)];
                if !(hcc > 0.0) {
                    continue;
                }
                let budget = mu * on / spec.scaling(j);
                let limit = rho_inverse(spec.rho, budget);
                let t = (-h[(k, c)] / hcc).clamp(-limit, limit);
                x[k] = 1.0;
                x[c] = t;
                if cone.contains(&x) {
                    consider(&x, &mut best, &mut best_x);
                }
                x[k] = 0.0;
                x[c] = 0.0;
            }
        }
    }
    let mut rng = stream_rng(seed, streams::CONE);
    for _ in 0..n_samples {
        let x = cone.sample(&mut rng);
        consider(&x, &mut best, &mut best_x);
    }
    if !best.is_finite() {
        return Err(invalid("support", "no direction with a non-zero support penalty"));
    }
    let zeta_sq = best.max(0.0);
    let zeta_hat = libm::sqrt(zeta_sq);
    Ok(REEstimate {
        zeta_hat,
        zeta_sq,
        mu,
        samples,
        skipped,
        min_direction: best_x,
        degenerate: zeta_hat < DEGENERATE_ZETA,
    })
}

fn unit(dim: usize, k: usize) -> Vec<f64> {
    let mut e = vec![0.0; dim];
    e[k] = 1.0;
    e
}
