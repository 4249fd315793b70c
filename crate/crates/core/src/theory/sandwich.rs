use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::basis::DesignExpansion;
use crate::error::{check_len, invalid, Result};
use crate::likelihood::PartialLikelihood;
use crate::linalg::sub;
use crate::survival::SurvivalDataset;

const SLACK: f64 = 1e-10;

/// Bounds at one interpolation point `b* = c b + (1 - c) beta*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichEntry {
    pub c: f64,
    /// `omega_low e^{-2 a_v} ||f||^2`.
    pub lower: f64,
    /// `||f||^2_{n,b*}`.
    pub middle: f64,
    /// `e^{2 a_v} ||f||^2`.
    pub upper: f64,
    pub lower_pass: bool,
    pub upper_pass: bool,
    /// `||f||^2_{n,b*} <= ||f - mean f||^2`.
    pub centered_upper_pass: bool,
}

/// Sandwich bounds of the likelihood-weighted norm of `f = f_b - f_{beta*}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    /// `max_{i,q} |v^T (Psi_i - Psi_q)|`, `v = b - beta*`.
    pub a_v: f64,
    /// `2 max_i |v^T Psi_i|`.
    pub a_alt: f64,
    /// `min_i omega_i(beta*)` over subjects in some risk set.
    pub omega_lower: f64,
    /// `||f||^2`.
    pub euclidean: f64,
    /// `||f - mean f||^2`.
    pub centered_euclidean: f64,
    /// Lower side of the centered bound; the minimum of 0 and an
    /// eigenvalue of a rank-one Gram matrix, hence never positive.
    pub centered_lower: f64,
    pub entries: Vec<SandwichEntry>,
    pub pass: bool,
    pub centered_pass: bool,
}

pub fn check_sandwich(
    design: &DesignExpansion,
    ds: &SurvivalDataset,
    b: &[f64],
    beta_star: &[f64],
    c_grid: &[f64],
) -> Result<SandwichReport> {
    check_len(design.dim(), b.len())?;
    check_len(design.dim(), beta_star.len())?;
    if c_grid.iter().any(|c| !(0.0..=1.0).contains(c)) {
        return Err(invalid("c_grid", "values must lie in [0, 1]"));
    }
    let lik = PartialLikelihood::new(design, ds)?;
    let v = sub(b, beta_star);
    let f = design.linear_predictor(&v);
    let (lo, hi) = f
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let a_v = hi - lo;
    let a_alt = 2.0 * f.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let omega_lower = lik.observation_weights(beta_star)?.lower;
    let euclidean = PartialLikelihood::euclidean_norm_sq(&f);
    let mean = f.iter().sum::<f64>() / f.len() as f64;
    let centered: Vec<f64> = f.iter().map(|x| x - mean).collect();
    let centered_euclidean = PartialLikelihood::euclidean_norm_sq(&centered);

    let mut entries = Vec::with_capacity(c_grid.len());
    let mut anchor = beta_star.to_vec();
    for &c in c_grid {
        for k in 0..anchor.len() {
            anchor[k] = c * b[k] + (1.0 - c) * beta_star[k];
        }
        let middle = lik.empirical_norm(&f, &anchor)?.squared;
        let lower = omega_lower * libm::exp(-2.0 * a_v) * euclidean;
        let upper = libm::exp(2.0 * a_v) * euclidean;
        entries.push(SandwichEntry {
            c,
            lower,
            middle,
            upper,
            lower_pass: lower <= middle + SLACK,
            upper_pass: middle <= upper + SLACK,
            centered_upper_pass: middle <= centered_euclidean + SLACK,
        });
    }
    let pass = entries.iter().all(|e| e.lower_pass && e.upper_pass);
    let centered_pass = entries.iter().all(|e| e.centered_upper_pass);
    Ok(SandwichReport {
        a_v,
        a_alt,
        omega_lower,
        euclidean,
        centered_euclidean,
        centered_lower: 0.0,
        entries,
        pass,
        centered_pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::survival::{CovariateBounds, SurvivalRecord};

    fn instance() -> (DesignExpansion, SurvivalDataset) {
        let xs = [[0.1, 0.7], [0.4, 0.2], [0.9, 0.5], [0.3, 0.3], [0.6, 0.8]];
        let recs = xs
            .iter()
            .enumerate()
            .map(|(k, x)| SurvivalRecord::new(1.0 + k as f64, k != 2, x.to_vec()))
            .collect();
        let ds = SurvivalDataset::new(recs, CovariateBounds::default(), None).unwrap();
        let m = Matrix::from_rows(&xs.iter().map(|x| x.to_vec()).collect::<Vec<_>>()).unwrap();
        (DesignExpansion::from_matrix(m, 2, 1).unwrap(), ds)
    }

    #[test]
    fn equal_arguments_give_zeros() {
        let (design, ds) = instance();
        let r = check_sandwich(&design, &ds, &[0.3, -0.2], &[0.3, -0.2], &[0.5]).unwrap();
        let e = r.entries[0];
        assert_eq!((e.lower, e.middle, e.upper), (0.0, 0.0, 0.0));
        assert!(r.pass && r.centered_pass);
    }

    #[test]
    fn a_v_is_homogeneous() {
        let (design, ds) = instance();
        let bs = [0.1, 0.2];
        let r1 = check_sandwich(&design, &ds, &[0.6, -0.3], &bs, &[0.5]).unwrap();
        let r2 = check_sandwich(&design, &ds, &[1.1, -0.8], &bs, &[0.5]).unwrap();
        assert!((r2.a_v - 2.0 * r1.a_v).abs() < 1e-14);
    }
}
