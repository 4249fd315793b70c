use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::cone::Cone;
use crate::basis::DesignExpansion;
use crate::error::{check_len, invalid, Error, Result};
use crate::likelihood::PartialLikelihood;
use crate::linalg::{dot, norm2};
use crate::rng::{stream_rng, streams};
use crate::survival::SurvivalDataset;

/// `omega_i(b)` and its gradient.
pub fn subject_weight(
    design: &DesignExpansion,
    ds: &SurvivalDataset,
    i: usize,
    b: &[f64],
) -> Result<(f64, Vec<f64>)> {
    check_len(design.dim(), b.len())?;
    check_len(ds.n(), design.n())?;
    if i >= ds.n() {
        return Err(invalid("subject", alloc::format!("{i} out of range")));
    }
    let risk = ds.risk_sets();
    let last = risk.last_at_risk(i).ok_or(Error::NeverAtRisk(i))?;
    let eta = design.linear_predictor(b);
    let order = risk.order();
    let dim = design.dim();
    let psi_i = design.row(i);
    let (mut shift, mut s0) = (f64::NEG_INFINITY, 0.0);
    let mut s1 = vec![0.0; dim];
    let mut value = 0.0;
    let mut grad = vec![0.0; dim];
    let mut pos = order.len();
    for q in (0..risk.len()).rev() {
        while pos > risk.risk_start(q) {
            pos -= 1;
            let l = order[pos];
            if eta[l] > shift {
                let r = if shift == f64::NEG_INFINITY {
                    0.0
                } else {
                    libm::exp(shift - eta[l])
                };
                s0 *= r;
                s1.iter_mut().for_each(|v| *v *= r);
                shift = eta[l];
            }
            let w = libm::exp(eta[l] - shift);
            s0 += w;
            for (acc, x) in s1.iter_mut().zip(design.row(l)) {
                *acc += w * x;
            }
        }
        if q <= last {
            let pi = libm::exp(eta[i] - shift) / s0;
            value += pi;
            for k in 0..dim {
                grad[k] += pi * (psi_i[k] - s1[k] / s0);
            }
        }
    }
    Ok((value, grad))
}

/// Numeric minimum of one subject's weight over a ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop1Report {
    pub subject: usize,
    /// Squared radius `b_n`.
    pub b_n: f64,
    pub numeric_min: f64,
    pub minimizer: Vec<f64>,
    pub value_at_zero: f64,
    /// Number of risk sets containing the subject.
    pub risk_set_count: usize,
    /// `lambda_min(Psi_i Psi_i^T)`.
    pub rank_one_min_eigenvalue: f64,
    /// `sum_q min{0, lambda_min(Psi_i Psi_i^T)} 1(i in R_q)`.
    pub eigen_bound: f64,
    pub starts: usize,
}

/// Minimizes `omega_i(b)` over `||b||^2 <= b_n` by projected gradient from
/// several starts, seeded by a boundary/disk grid when `pd <= 3`.
pub fn min_weight_prop1(
    design: &DesignExpansion,
    ds: &SurvivalDataset,
    i: usize,
    b_n: f64,
    seed: u64,
) -> Result<Prop1Report> {
    if !(b_n > 0.0 && b_n.is_finite()) {
        return Err(invalid("b_n", "must be finite and positive"));
    }
    let dim = design.dim();
    let radius = libm::sqrt(b_n);
    let objective = |b: &[f64]| subject_weight(design, ds, i, b);
    let zero = vec![0.0; dim];
    let value_at_zero = objective(&zero)?.0;

    let mut starts: Vec<Vec<f64>> = vec![zero];
    let mut rng = stream_rng(seed, streams::STARTS);
    for _ in 0..8 {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let nv = norm2(&v);
        let r = radius * libm::pow(rng.random::<f64>(), 1.0 / dim as f64);
        if nv > 0.0 {
            v.iter_mut().for_each(|x| *x *= r / nv);
        }
        starts.push(v);
    }
    if dim <= 3 {
        let mut best = (f64::INFINITY, Vec::new());
        for p in ball_grid(dim, radius) {
            let v = objective(&p)?.0;
            if v < best.0 {
                best = (v, p);
            }
        }
        starts.push(best.1);
    }
    let mut best = (f64::INFINITY, Vec::new());
    for s in &starts {
        let (v, x) = projected_descent(&objective, s.clone(), radius)?;
        if v < best.0 {
            best = (v, x);
        }
    }

    let psi = design.row(i);
    let rank_one_min_eigenvalue = if dim == 1 { psi[0] * psi[0] } else { 0.0 };
    let risk_set_count = ds.risk_sets().last_at_risk(i).map_or(0, |k| k + 1);
    Ok(Prop1Report {
        subject: i,
        b_n,
        numeric_min: best.0,
        minimizer: best.1,
        value_at_zero,
        risk_set_count,
        rank_one_min_eigenvalue,
        eigen_bound: risk_set_count as f64 * rank_one_min_eigenvalue.min(0.0),
        starts: starts.len(),
    })
}

fn project(x: &mut [f64], radius: f64) {
    let n = norm2(x);
    if n > radius {
        x.iter_mut().for_each(|v| *v *= radius / n);
    }
}

fn projected_descent(
    objective: &impl Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
    mut x: Vec<f64>,
    radius: f64,
) -> Result<(f64, Vec<f64>)> {
    project(&mut x, radius);
    let (mut fx, mut g) = objective(&x)?;
    let mut step = 1.0;
    for _ in 0..500 {
        let mut accepted = false;
        while step > 1e-14 {
            let mut y: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - step * b).collect();
            project(&mut y, radius);
            let (fy, gy) = objective(&y)?;
            let d: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
            if fy <= fx + dot(&g, &d) + 0.5 / step * dot(&d, &d) {
                let moved = norm2(&d);
                accepted = moved > 1e-13 * radius.max(1.0);
                x = y;
                fx = fy;
                g = gy;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok((fx, x))
}

/// Points covering the ball of radius `r` in dimension 1, 2 or 3.
fn ball_grid(dim: usize, r: f64) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    match dim {
        1 => {
            for k in 0..=2000 {
                out.push(vec![-r + 2.0 * r * k as f64 / 2000.0]);
            }
        }
        2 => {
            for ri in 1..=20 {
                let rr = r * ri as f64 / 20.0;
                for a in 0..360 {
                    let t = 2.0 * PI * a as f64 / 360.0;
                    out.push(vec![rr * libm::cos(t), rr * libm::sin(t)]);
                }
            }
        }
        _ => {
            for ri in 1..=8 {
                let rr = r * ri as f64 / 8.0;
                for a in 0..=30 {
                    let th = PI * a as f64 / 30.0;
                    for b in 0..60 {
                        let ph = 2.0 * PI * b as f64 / 60.0;
                        out.push(vec![
                            rr * libm::sin(th) * libm::cos(ph),
                            rr * libm::sin(th) * libm::sin(ph),
                            rr * libm::cos(th),
                        ]);
                    }
                }
            }
        }
    }
    out
}

/// Sampled estimate of the weight lower bound over cone points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaLowerEstimate {
    pub omega_lower: f64,
    /// Cone vector and `c` attaining the minimum.
    pub argmin_vector: Vec<f64>,
    pub argmin_c: f64,
    pub vectors: usize,
    pub c_values: Vec<f64>,
    /// Squared radius of a ball around 0 containing every evaluated point.
    pub enclosing_ball_sq: f64,
}

/// `min_i omega_i(beta* + c (b - beta*))` over `n_vectors` sampled cone
/// members `b` with `||b||_2 <= radius` and each `c` in `c_grid`.
pub fn sample_omega_lower(
    design: &DesignExpansion,
    ds: &SurvivalDataset,
    beta_star: &[f64],
    cone: &Cone<'_>,
    radius: f64,
    n_vectors: usize,
    c_grid: &[f64],
    seed: u64,
) -> Result<OmegaLowerEstimate> {
    check_len(design.dim(), beta_star.len())?;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(invalid("radius", "must be finite and positive"));
    }
    if c_grid.is_empty() || c_grid.iter().any(|c| !(0.0..=1.0).contains(c)) {
        return Err(invalid("c_grid", "needs values in [0, 1]"));
    }
    let lik = PartialLikelihood::new(design, ds)?;
    let mut rng = stream_rng(seed, streams::CONE);
    let mut best = (f64::INFINITY, Vec::new(), 0.0);
    let mut point = vec![0.0; beta_star.len()];
    for _ in 0..n_vectors {
        let mut b = cone.sample(&mut rng);
        let nb = norm2(&b);
        if nb > 0.0 {
            let r = radius * rng.random::<f64>();
            b.iter_mut().for_each(|v| *v *= r / nb);
        }
        for &c in c_grid {
            for k in 0..point.len() {
                point[k] = beta_star[k] + c * (b[k] - beta_star[k]);
            }
            let w = lik.observation_weights(&point)?.lower;
            if w < best.0 {
                best = (w, b.clone(), c);
            }
        }
    }
    let outer = norm2(beta_star) + radius;
    Ok(OmegaLowerEstimate {
        omega_lower: best.0,
        argmin_vector: best.1,
        argmin_c: best.2,
        vectors: n_vectors,
        c_values: c_grid.to_vec(),
        enclosing_ball_sq: outer * outer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::survival::{CovariateBounds, SurvivalRecord};

    fn data(rows: &[(f64, bool, f64)]) -> (DesignExpansion, SurvivalDataset) {
        let recs: Vec<SurvivalRecord> = rows
            .iter()
            .map(|&(t, e, x)| SurvivalRecord::new(t, e, vec![x]))
            .collect();
        let ds = SurvivalDataset::new(recs, CovariateBounds::default(), None).unwrap();
        let m = Matrix::from_rows(&rows.iter().map(|r| vec![r.2]).collect::<Vec<_>>()).unwrap();
        (DesignExpansion::from_matrix(m, 1, 1).unwrap(), ds)
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let (design, ds) = data(&[(1.0, true, 0.2), (2.0, true, 0.9), (3.0, false, 0.5), (4.0, true, 0.1)]);
        let lik = PartialLikelihood::new(&design, &ds).unwrap();
        for i in 0..4 {
            let (w, g) = subject_weight(&design, &ds, i, &[0.7]).unwrap();
            let all = lik.observation_weights(&[0.7]).unwrap();
            assert!((w - all.weights[i]).abs() < 1e-12);
            let h = 1e-6;
            let fd = (subject_weight(&design, &ds, i, &[0.7 + h]).unwrap().0
                - subject_weight(&design, &ds, i, &[0.7 - h]).unwrap().0)
                / (2.0 * h);
            assert!((fd - g[0]).abs() < 1e-7);
        }
    }

    #[test]
    fn single_subject_weight_is_one() {
        let (design, ds) = data(&[(1.0, true, 0.4)]);
        let r = min_weight_prop1(&design, &ds, 0, 4.0, 1).unwrap();
        assert!((r.numeric_min - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_covariates_give_constant_weight() {
        let (design, ds) = data(&[(1.0, true, 0.5), (2.0, true, 0.5), (3.0, true, 0.5)]);
        let r = min_weight_prop1(&design, &ds, 1, 4.0, 1).unwrap();
        assert!((r.numeric_min - r.value_at_zero).abs() < 1e-12);
    }

    #[test]
    fn never_at_risk() {
        let (design, ds) = data(&[(0.5, false, 0.5), (2.0, true, 0.5)]);
        assert_eq!(
            min_weight_prop1(&design, &ds, 0, 1.0, 1).unwrap_err(),
            Error::NeverAtRisk(0)
        );
    }
}
