//! Cox log partial likelihood with its score, negative Hessian, observation
//! weights and the likelihood-weighted empirical norm.
//!
//! Sums over risk sets are accumulated from the last failure time backwards
//! with a running maximum shift, so `exp` never overflows. Tied event times
//! follow the Breslow convention.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::basis::DesignExpansion;
use crate::error::{check_len, Error, Result};
use crate::linalg::{axpy, dot, Matrix};
use crate::survival::SurvivalDataset;

/// Risk-set moments at one time point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskMoments {
    /// `S_n^(0)`; may be `inf` for huge predictors, see `log_s0`.
    pub s0: f64,
    pub log_s0: f64,
    pub s1: Vec<f64>,
    pub s2: Matrix,
    /// `E_n = S1 / S0`.
    pub mean: Vec<f64>,
    /// `V_n = S2 / S0 - E_n E_n^T`.
    pub covariance: Matrix,
}

/// Per-subject weights `omega_i(b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub weights: Vec<f64>,
    /// Minimum over subjects in at least one risk set.
    pub lower: f64,
    pub upper: f64,
}

/// The squared empirical norm and the weighted mean of `f` at each failure time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalNorm {
    pub squared: f64,
    pub centered_means: Vec<f64>,
}

/// The empirical norm computed three ways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormForms {
    /// Weighted variance around the per-time mean.
    pub variance: f64,
    /// Second moment minus squared mean, taken at each failure time.
    pub moment: f64,
    /// Aggregated second moment minus the square of the aggregated mean.
    pub aggregated: f64,
}

/// Partial likelihood of one dataset under one design.
#[derive(Debug, Clone)]
pub struct PartialLikelihood<'a> {
    design: &'a DesignExpansion,
    data: &'a SurvivalDataset,
    event_sum: Vec<f64>,
    log_n: f64,
}

/// Numerically stable running sum of `exp(x)`.
#[derive(Debug, Clone, Copy)]
struct ShiftedSum {
    shift: f64,
    sum: f64,
}

impl ShiftedSum {
    fn new() -> Self {
        Self {
            shift: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    /// Adds `exp(x)`; returns `(rescale, w)` where previous accumulators must
    /// be multiplied by `rescale` and the new term has weight `w`.
    fn push(&mut self, x: f64) -> (f64, f64) {
        let mut rescale = 1.0;
        if x > self.shift {
            rescale = if self.shift == f64::NEG_INFINITY {
                0.0
            } else {
                libm::exp(self.shift - x)
            };
            self.sum *= rescale;
            self.shift = x;
        }
        let w = libm::exp(x - self.shift);
        self.sum += w;
        (rescale, w)
    }

    fn log(&self) -> f64 {
        self.shift + libm::log(self.sum)
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + libm::log1p(libm::exp(lo - hi))
}

impl<'a> PartialLikelihood<'a> {
    pub fn new(design: &'a DesignExpansion, data: &'a SurvivalDataset) -> Result<Self> {
        check_len(data.n(), design.n())?;
        let mut event_sum = vec![0.0; design.dim()];
        let risk = data.risk_sets();
        for q in 0..risk.len() {
            for &i in risk.events_at(q) {
                axpy(1.0, design.row(i), &mut event_sum);
            }
        }
        Ok(Self {
            design,
            data,
            event_sum,
            log_n: libm::log(data.n() as f64),
        })
    }

    pub fn design(&self) -> &DesignExpansion {
        self.design
    }

    pub fn data(&self) -> &SurvivalDataset {
        self.data
    }

    pub fn dim(&self) -> usize {
        self.design.dim()
    }

    fn n(&self) -> f64 {
        self.data.n() as f64
    }

    fn eta(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), b.len())?;
        Ok(self.design.linear_predictor(b))
    }

    /// `log sum_{R_q} exp(eta)` for every failure time.
    fn log_risk_sums(&self, eta: &[f64]) -> Vec<f64> {
        let risk = self.data.risk_sets();
        let order = risk.order();
        let mut out = vec![0.0; risk.len()];
        let mut acc = ShiftedSum::new();
        let mut pos = order.len();
        for q in (0..risk.len()).rev() {
            while pos > risk.risk_start(q) {
                pos -= 1;
                acc.push(eta[order[pos]]);
            }
            out[q] = acc.log();
        }
        out
    }

    /// `L_n(b)` from the linear predictor.
    pub fn value_from_eta(&self, eta: &[f64]) -> f64 {
        let risk = self.data.risk_sets();
        let logs = self.log_risk_sums(eta);
        let mut total = 0.0;
        for (q, &ls) in logs.iter().enumerate() {
            for &i in risk.events_at(q) {
                total += eta[i] - (ls - self.log_n);
            }
        }
        total / self.n()
    }

    /// `L_n` increases along `u` without bound above: every failing subject
    /// has the largest `u^T x` in its risk set, strictly for at least one.
    pub fn separating_direction(&self, u: &[f64]) -> Result<bool> {
        let eta = self.eta(u)?;
        let scale = eta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return Ok(false);
        }
        let tol = 1e-9 * scale;
        let risk = self.data.risk_sets();
        let order = risk.order();
        let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
        let mut strict = false;
        let mut pos = order.len();
        for q in (0..risk.len()).rev() {
            while pos > risk.risk_start(q) {
                pos -= 1;
                hi = hi.max(eta[order[pos]]);
                lo = lo.min(eta[order[pos]]);
            }
            for &i in risk.events_at(q) {
                if eta[i] < hi - tol {
                    return Ok(false);
                }
                strict |= eta[i] > lo + tol;
            }
        }
        Ok(strict)
    }

    /// Log partial likelihood `L_n(b)`.
    pub fn log_likelihood(&self, b: &[f64]) -> Result<f64> {
        Ok(self.value_from_eta(&self.eta(b)?))
    }

    /// `L_n(b)` together with its gradient.
    pub fn value_and_score(&self, b: &[f64]) -> Result<(f64, Vec<f64>)> {
        let eta = self.eta(b)?;
        let k = self.dim();
        let risk = self.data.risk_sets();
        let order = risk.order();
        let mut acc = ShiftedSum::new();
        let mut s1 = vec![0.0; k];
        let mut grad = self.event_sum.clone();
        let mut value = 0.0;
        let mut pos = order.len();
        for q in (0..risk.len()).rev() {
            while pos > risk.risk_start(q) {
                pos -= 1;
                let i = order[pos];
                let (rescale, w) = acc.push(eta[i]);
                if rescale != 1.0 {
                    s1.iter_mut().for_each(|v| *v *= rescale);
                }
                axpy(w, self.design.row(i), &mut s1);
            }
            let events = risk.events_at(q);
            let dq = events.len() as f64;
            value += events.iter().map(|&i| eta[i]).sum::<f64>() - dq * (acc.log() - self.log_n);
            axpy(-dq / acc.sum, &s1, &mut grad);
        }
        let n = self.n();
        grad.iter_mut().for_each(|g| *g /= n);
        Ok((value / n, grad))
    }

    /// Gradient of `L_n` at `b`.
    pub fn score(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.value_and_score(b).map(|(_, g)| g)
    }

    /// Negative Hessian `-grad^2 L_n(b) = n^{-1} sum_q d_q V_n(b, t_q)`.
    pub fn hessian(&self, b: &[f64]) -> Result<Matrix> {
        let eta = self.eta(b)?;
        let k = self.dim();
        let risk = self.data.risk_sets();
        let order = risk.order();
        let mut acc = ShiftedSum::new();
        let mut s1 = vec![0.0; k];
        let mut s2 = Matrix::zeros(k, k);
        let mut h = Matrix::zeros(k, k);
        let mut pos = order.len();
        for q in (0..risk.len()).rev() {
            while pos > risk.risk_start(q) {
                pos -= 1;
                let i = order[pos];
                let (rescale, w) = acc.push(eta[i]);
                if rescale != 1.0 {
                    s1.iter_mut().for_each(|v| *v *= rescale);
                    for r in 0..k {
                        s2.row_mut(r).iter_mut().for_each(|v| *v *= rescale);
                    }
                }
                let x = self.design.row(i);
                axpy(w, x, &mut s1);
                for r in 0..k {
                    if x[r] != 0.0 {
                        axpy(w * x[r], x, s2.row_mut(r));
                    }
                }
            }
            let dq = risk.events_at(q).len() as f64;
            let s0 = acc.sum;
            for r in 0..k {
                let er = s1[r] / s0;
                let row = h.row_mut(r);
                for c in 0..k {
                    row[c] += dq * (s2[(r, c)] / s0 - er * s1[c] / s0);
                }
            }
        }
        let n = self.n();
        for r in 0..k {
            h.row_mut(r).iter_mut().for_each(|v| *v /= n);
        }
        // Symmetrize away rounding.
        for r in 0..k {
            for c in 0..r {
                let v = 0.5 * (h[(r, c)] + h[(c, r)]);
                h[(r, c)] = v;
                h[(c, r)] = v;
            }
        }
        Ok(h)
    }

    /// `S_n^(0)`, `S_n^(1)`, `S_n^(2)`, `E_n` and `V_n` at time `t`.
    pub fn risk_moments(&self, b: &[f64], t: f64) -> Result<RiskMoments> {
        let eta = self.eta(b)?;
        let at_risk = self.data.at_risk(t);
        if at_risk.is_empty() {
            return Err(Error::EmptyRiskSet(t));
        }
        let k = self.dim();
        let shift = at_risk.iter().map(|&i| eta[i]).fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = at_risk.iter().map(|&i| libm::exp(eta[i] - shift)).collect();
        let total: f64 = w.iter().sum();
        let mut mean = vec![0.0; k];
        for (&i, &wi) in at_risk.iter().zip(&w) {
            axpy(wi / total, self.design.row(i), &mut mean);
        }
        let mut covariance = Matrix::zeros(k, k);
        for (&i, &wi) in at_risk.iter().zip(&w) {
            let centered: Vec<f64> = self.design.row(i).iter().zip(&mean).map(|(x, m)| x - m).collect();
            for r in 0..k {
                axpy(wi / total * centered[r], &centered, covariance.row_mut(r));
            }
        }
        let log_s0 = shift + libm::log(total) - self.log_n;
        let s0 = libm::exp(log_s0);
        let s1 = mean.iter().map(|m| s0 * m).collect();
        let mut s2 = covariance.clone();
        for r in 0..k {
            for c in 0..k {
                s2[(r, c)] = s0 * (s2[(r, c)] + mean[r] * mean[c]);
            }
        }
        Ok(RiskMoments {
            s0,
            log_s0,
            s1,
            s2,
            mean,
            covariance,
        })
    }

    /// `log S_n^(0)(b, t_q)` at every failure time.
    pub fn log_s0_at_failures(&self, b: &[f64]) -> Result<Vec<f64>> {
        let eta = self.eta(b)?;
        Ok(self
            .log_risk_sums(&eta)
            .into_iter()
            .map(|v| v - self.log_n)
            .collect())
    }

    /// Per-subject weights `omega_i(b) = sum_q pi_qi`.
    pub fn observation_weights(&self, b: &[f64]) -> Result<WeightVector> {
        let eta = self.eta(b)?;
        self.weights_from_eta(&eta)
    }

    pub(crate) fn weights_from_eta(&self, eta: &[f64]) -> Result<WeightVector> {
        if self.data.no_events() {
            return Err(Error::NoEvents);
        }
        let risk = self.data.risk_sets();
        let logs = self.log_risk_sums(eta);
        // prefix[k] = log sum_{q <= k} 1 / W_q
        let mut prefix = Vec::with_capacity(logs.len());
        let mut acc = f64::NEG_INFINITY;
        for &l in &logs {
            acc = log_add_exp(acc, -l);
            prefix.push(acc);
        }
        let mut lower = f64::INFINITY;
        let mut upper: f64 = 0.0;
        let weights = (0..self.data.n())
            .map(|i| match risk.last_at_risk(i) {
                Some(k) => {
                    let w = libm::exp(eta[i] + prefix[k]);
                    lower = lower.min(w);
                    upper = upper.max(w);
                    w
                }
                None => 0.0,
            })
            .collect();
        Ok(WeightVector {
            weights,
            lower,
            upper,
        })
    }

    /// Weight process `omega_i(b*, t) = exp{f_{b*}(X_i)} / S_n^(0)(b*, t)`.
    /// Entries of subjects not at risk at `t` are 0.
    pub fn weight_process(&self, anchor: &[f64], t: f64) -> Result<Vec<f64>> {
        let eta = self.eta(anchor)?;
        let at_risk = self.data.at_risk(t);
        if at_risk.is_empty() {
            return Err(Error::EmptyRiskSet(t));
        }
        let mut acc = ShiftedSum::new();
        for &i in at_risk {
            acc.push(eta[i]);
        }
        let log_s0 = acc.log() - self.log_n;
        let mut out = vec![0.0; self.data.n()];
        for &i in at_risk {
            out[i] = libm::exp(eta[i] - log_s0);
        }
        Ok(out)
    }

    /// `||f||^2_{n,b*}` in variance form: `n^{-1} sum_q d_q Var_{pi_q}(f)`.
    pub fn empirical_norm(&self, f: &[f64], anchor: &[f64]) -> Result<EmpiricalNorm> {
        check_len(self.data.n(), f.len())?;
        let eta = self.eta(anchor)?;
        let risk = self.data.risk_sets();
        let order = risk.order();
        let mut acc = ShiftedSum::new();
        // Weighted Welford: mean and sum of weighted squared deviations.
        let mut mean = 0.0;
        let mut m2 = 0.0;
        let mut means = vec![0.0; risk.len()];
        let mut total = 0.0;
        let mut pos = order.len();
        for q in (0..risk.len()).rev() {
            while pos > risk.risk_start(q) {
                pos -= 1;
                let i = order[pos];
                let (rescale, w) = acc.push(eta[i]);
                m2 *= rescale;
                let delta = f[i] - mean;
                mean += w / acc.sum * delta;
                m2 += w * delta * (f[i] - mean);
            }
            means[q] = mean;
            total += risk.events_at(q).len() as f64 * (m2 / acc.sum).max(0.0);
        }
        Ok(EmpiricalNorm {
            squared: total / self.n(),
            centered_means: means,
        })
    }

    /// The empirical norm in variance, per-time moment and aggregated forms.
    pub fn empirical_norm_forms(&self, f: &[f64], anchor: &[f64]) -> Result<NormForms> {
        let variance = self.empirical_norm(f, anchor)?.squared;
        let eta = self.eta(anchor)?;
        let risk = self.data.risk_sets();
        let order = risk.order();
        let mut acc = ShiftedSum::new();
        let (mut sf, mut sff) = (0.0, 0.0);
        let (mut moment, mut agg1, mut agg2) = (0.0, 0.0, 0.0);
        let mut pos = order.len();
        for q in (0..risk.len()).rev() {
            while pos > risk.risk_start(q) {
                pos -= 1;
                let i = order[pos];
                let (rescale, w) = acc.push(eta[i]);
                sf = sf * rescale + w * f[i];
                sff = sff * rescale + w * f[i] * f[i];
            }
            let dq = risk.events_at(q).len() as f64;
            let (m1, m2) = (sf / acc.sum, sff / acc.sum);
            moment += dq * (m2 - m1 * m1);
            agg1 += dq * m1;
            agg2 += dq * m2;
        }
        let n = self.n();
        Ok(NormForms {
            variance,
            moment: moment / n,
            aggregated: agg2 / n - (agg1 / n) * (agg1 / n),
        })
    }

    /// Plain empirical norm `n^{-1} sum_i f_i^2`.
    pub fn euclidean_norm_sq(f: &[f64]) -> f64 {
        dot(f, f) / f.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::{CovariateBounds, SurvivalRecord};

    fn dataset(rows: &[(f64, bool)]) -> SurvivalDataset {
        let recs = rows
            .iter()
            .map(|&(t, e)| SurvivalRecord::new(t, e, vec![0.5]))
            .collect();
        SurvivalDataset::new(recs, CovariateBounds::default(), None).unwrap()
    }

    fn design(rows: &[&[f64]]) -> DesignExpansion {
        let m = Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap();
        let k = m.cols();
        DesignExpansion::from_matrix(m, 1, k).unwrap()
    }

    #[test]
    fn single_subject() {
        let ds = dataset(&[(1.0, true)]);
        let x = design(&[&[0.3, -2.0]]);
        let pl = PartialLikelihood::new(&x, &ds).unwrap();
        for b in [[0.0, 0.0], [1.5, -0.7]] {
            let (v, g) = pl.value_and_score(&b).unwrap();
            assert!(v.abs() < 1e-15);
            assert!(g.iter().all(|v| v.abs() < 1e-15));
            assert!(pl.hessian(&b).unwrap().max_abs() < 1e-15);
        }
    }

    #[test]
    fn two_events_hand_value() {
        let ds = dataset(&[(1.0, true), (2.0, true)]);
        let x = design(&[&[1.0], &[-1.0]]);
        let pl = PartialLikelihood::new(&x, &ds).unwrap();
        let v = pl.log_likelihood(&[0.0]).unwrap();
        assert!((v - 0.5 * core::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn score_hand_value() {
        let a = 0.7;
        let ds = dataset(&[(1.0, true), (2.0, false)]);
        let x = design(&[&[a], &[-a]]);
        let pl = PartialLikelihood::new(&x, &ds).unwrap();
        let g = pl.score(&[0.0]).unwrap();
        assert!((g[0] - a / 2.0).abs() < 1e-15);
    }

    #[test]
    fn two_point_moments() {
        let ds = dataset(&[(1.0, true), (1.0, false)]);
        let x = design(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let pl = PartialLikelihood::new(&x, &ds).unwrap();
        let m = pl.risk_moments(&[0.0, 0.0], 1.0).unwrap();
        assert_eq!(m.mean, vec![0.5, 0.5]);
        let want = Matrix::from_rows(&[vec![0.25, -0.25], vec![-0.25, 0.25]]).unwrap();
        assert!(m.covariance.max_abs_diff(&want) < 1e-15);
        assert!((m.s0 - 1.0).abs() < 1e-15);
        assert!(matches!(pl.risk_moments(&[0.0, 0.0], 5.0), Err(Error::EmptyRiskSet(_))));
    }

    #[test]
    fn weights_examples() {
        let ds = dataset(&[(1.0, true), (2.0, false), (3.0, false)]);
        let x = design(&[&[1.0], &[0.0], &[0.0]]);
        let pl = PartialLikelihood::new(&x, &ds).unwrap();
        let w = pl.observation_weights(&[0.0]).unwrap();
        for v in &w.weights {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let w = pl.observation_weights(&[30.0]).unwrap();
        assert!((w.weights[0] - 1.0).abs() < 1e-10);
        let all_censored = dataset(&[(1.0, false), (2.0, false)]);
        let x2 = design(&[&[1.0], &[0.0]]);
        let pl = PartialLikelihood::new(&x2, &all_censored).unwrap();
        assert_eq!(pl.observation_weights(&[0.0]), Err(Error::NoEvents));
    }

    #[test]
    fn weight_process_examples() {
        let ds = dataset(&[(1.0, true), (2.0, true), (3.0, false)]);
        let x = design(&[&[1.0], &[0.2], &[-0.4]]);
        let pl = PartialLikelihood::new(&x, &ds).unwrap();
        let w = pl.weight_process(&[0.0], 2.0).unwrap();
        assert_eq!(w[0], 0.0);
        assert!((w[1] - 1.5).abs() < 1e-14 && (w[2] - 1.5).abs() < 1e-14);
        let w = pl.weight_process(&[0.8], 3.0).unwrap();
        assert!((w[2] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn norm_of_constant_is_zero_and_forms_agree() {
        let ds = dataset(&[(1.0, true), (2.0, true), (3.0, true), (4.0, false)]);
        let x = design(&[&[1.0], &[0.2], &[-0.4], &[0.9]]);
        let pl = PartialLikelihood::new(&x, &ds).unwrap();
        let n = pl.empirical_norm(&[2.0; 4], &[0.3]).unwrap();
        assert!(n.squared.abs() < 1e-15);
        let f = [0.3, -1.0, 2.0, 0.5];
        let forms = pl.empirical_norm_forms(&f, &[0.3]).unwrap();
        assert!((forms.variance - forms.moment).abs() < 1e-14);
        // The Hessian quadratic form is the same norm for f = Psi x.
        let h = pl.hessian(&[0.3]).unwrap();
        let fx = x.linear_predictor(&[1.7]);
        let norm = pl.empirical_norm(&fx, &[0.3]).unwrap().squared;
        assert!((h.quadratic_form(&[1.7]) - norm).abs() < 1e-14);
    }

    #[test]
    fn huge_predictors_stay_finite() {
        let ds = dataset(&[(1.0, true), (2.0, true), (3.0, false)]);
        let x = design(&[&[1.0], &[0.0], &[-1.0]]);
        let pl = PartialLikelihood::new(&x, &ds).unwrap();
        for b in [900.0, -900.0] {
            let (v, g) = pl.value_and_score(&[b]).unwrap();
            assert!(v.is_finite() && g[0].is_finite());
            assert!(pl.hessian(&[b]).unwrap().max_abs().is_finite());
            let w = pl.observation_weights(&[b]).unwrap();
            let total: f64 = w.weights.iter().sum();
            assert!((total - 2.0).abs() < 1e-10);
        }
    }
}
