//! Penalized partial-likelihood fitting by proximal gradient, and the
//! theory-driven tuning-parameter rules.

mod lambda;

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::basis::{reparametrize_design, DesignExpansion};
use crate::error::{check_len, invalid, Error, Result};
use crate::likelihood::PartialLikelihood;
use crate::linalg::{norm2, norm_inf};
use crate::penalty::{expand_overlap, PenaltySpec, Rho, SmoothPenaltySpec};
use crate::survival::SurvivalDataset;

pub use lambda::{lambda_from_theory, plug_in_u, GridSpec, LambdaAudit, LambdaRule, RuleKind};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    #[default]
    Standard,
    SmoothReparametrized,
    OverlapLatent,
}

/// Solver settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub max_iters: usize,
    /// Relative objective-change tolerance.
    pub tol: f64,
    pub initial_step: f64,
    pub shrink: f64,
    pub sufficient_decrease: f64,
    /// Monotone FISTA momentum.
    pub accelerate: bool,
    /// Starting point (zero when absent).
    pub start: Option<Vec<f64>>,
    pub mode: FitMode,
    /// Stop and flag divergence once some `|f_b(X_i)|` exceeds this.
    pub max_linear_predictor: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iters: 10_000,
            tol: 1e-9,
            initial_step: 1.0,
            shrink: 0.5,
            sufficient_decrease: 0.5,
            accelerate: true,
            start: None,
            mode: FitMode::Standard,
            max_linear_predictor: 300.0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(invalid("fit.max_iters", "must be positive"));
        }
        if !(self.tol > 0.0) {
            return Err(invalid("fit.tol", "must be positive"));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(invalid("fit.shrink", "must lie in (0, 1)"));
        }
        if !(self.initial_step > 0.0) {
            return Err(invalid("fit.initial_step", "must be positive"));
        }
        if !(self.sufficient_decrease > 0.0 && self.sufficient_decrease <= 0.5) {
            return Err(invalid("fit.sufficient_decrease", "must lie in (0, 0.5]"));
        }
        if !(self.max_linear_predictor > 0.0) {
            return Err(invalid("fit.max_linear_predictor", "must be positive"));
        }
        Ok(())
    }

    /// KKT tolerance paired with `tol`.
    pub fn kkt_tol(&self) -> f64 {
        (10.0 * self.tol).min(1e-6)
    }
}

/// Output of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub beta_hat: Vec<f64>,
    /// Objective `-L_n + penalty` after each iteration, starting point first.
    pub objective_trace: Vec<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub active_groups: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    /// The linear predictor blew past `max_linear_predictor`.
    pub diverged: bool,
    pub final_step: f64,
    /// Latent coefficients for overlap fits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent_beta: Option<Vec<f64>>,
}

/// Result of a smooth-selection fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothFit {
    /// Fit in original coordinates (`beta_hat = R^{-1} beta_tilde`).
    pub result: FitResult,
    pub beta_tilde: Vec<f64>,
    pub objective_original: f64,
    pub objective_reparametrized: f64,
}

/// `min smooth(x) + penalty(x)` with a cheap prox.
trait Composite {
    fn smooth_with_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)>;
    fn smooth(&self, x: &[f64]) -> Result<f64>;
    fn penalty(&self, x: &[f64]) -> f64;
    fn prox(&self, z: &[f64], step: f64) -> Result<Vec<f64>>;
    fn kkt(&self, x: &[f64], g: &[f64]) -> f64;
    fn subgradient(&self, x: &[f64]) -> Vec<f64>;
    fn max_predictor(&self, x: &[f64]) -> f64;

    fn likelihood(&self) -> &PartialLikelihood<'_>;

    /// The objective keeps dropping along `x`: an unpenalized separating
    /// direction, where the gradient decays below any tolerance.
    fn recedes(&self, x: &[f64], obj: f64) -> Result<bool> {
        if x.iter().all(|&v| v == 0.0) {
            return Ok(false);
        }
        if self.penalty(x) == 0.0 && self.likelihood().separating_direction(x)? {
            return Ok(true);
        }
        let doubled: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let v = self.smooth(&doubled)? + self.penalty(&doubled);
        Ok(v.is_finite() && v < obj - 8.0 * f64::EPSILON * obj.abs().max(1.0))
    }
}

struct GpfProblem<'a> {
    lik: PartialLikelihood<'a>,
    spec: &'a PenaltySpec,
}

impl Composite for GpfProblem<'_> {
    fn smooth_with_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (v, mut g) = self.lik.value_and_score(x)?;
        g.iter_mut().for_each(|gi| *gi = -*gi);
        Ok((-v, g))
    }
    fn smooth(&self, x: &[f64]) -> Result<f64> {
        self.lik.log_likelihood(x).map(|v| -v)
    }
    fn penalty(&self, x: &[f64]) -> f64 {
        self.spec.weighted_penalty(x).unwrap_or(f64::NAN)
    }
    fn prox(&self, z: &[f64], step: f64) -> Result<Vec<f64>> {
        self.spec.prox(z, step)
    }
    fn kkt(&self, x: &[f64], g: &[f64]) -> f64 {
        self.spec.kkt_residual(x, g)
    }
    fn subgradient(&self, x: &[f64]) -> Vec<f64> {
        self.spec.subgradient(x)
    }
    fn max_predictor(&self, x: &[f64]) -> f64 {
        norm_inf(&self.lik.design().linear_predictor(x))
    }
    fn likelihood(&self) -> &PartialLikelihood<'_> {
        &self.lik
    }
}

struct SmoothProblem<'a> {
    lik: PartialLikelihood<'a>,
    spec: &'a SmoothPenaltySpec,
}

impl Composite for SmoothProblem<'_> {
    fn smooth_with_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (v, mut g) = self.lik.value_and_score(x)?;
        g.iter_mut().for_each(|gi| *gi = -*gi);
        Ok((-v, g))
    }
    fn smooth(&self, x: &[f64]) -> Result<f64> {
        self.lik.log_likelihood(x).map(|v| -v)
    }
    fn penalty(&self, x: &[f64]) -> f64 {
        self.spec.lambda * self.spec.reparametrized_value(x).unwrap_or(f64::NAN)
    }
    fn prox(&self, z: &[f64], step: f64) -> Result<Vec<f64>> {
        self.spec.prox_reparametrized(z, step)
    }
    fn kkt(&self, x: &[f64], g: &[f64]) -> f64 {
        self.spec.kkt_residual_reparametrized(x, g)
    }
    fn subgradient(&self, x: &[f64]) -> Vec<f64> {
        // Only reached for non-identity rho.
        let d = self.spec.d();
        let mut out = vec![0.0; x.len()];
        let scale = libm::sqrt(d as f64) * self.spec.lambda;
        for (j, gamma) in self.spec.gammas().iter().enumerate() {
            let xj = &x[j * d..(j + 1) * d];
            let n2 = norm2(xj);
            if n2 == 0.0 {
                continue;
            }
            let ng = gamma.norm(xj);
            let w = scale * self.spec.rho.derivative(ng + n2);
            let single = PenaltySpec::uniform(1, d, *gamma, 1.0)
                .map(|s| s.subgradient(xj))
                .unwrap_or_else(|_| vec![0.0; d]);
            for k in 0..d {
                out[j * d + k] = w * (single[k] + xj[k] / n2);
            }
        }
        out
    }
    fn max_predictor(&self, x: &[f64]) -> f64 {
        norm_inf(&self.lik.design().linear_predictor(x))
    }
    fn likelihood(&self) -> &PartialLikelihood<'_> {
        &self.lik
    }
}

fn proximal_gradient(
    problem: &impl Composite,
    config: &FitConfig,
    start: Vec<f64>,
) -> Result<FitResult> {
    let kkt_tol = config.kkt_tol();
    // Relative rounding level of a likelihood summed over n subjects.
    let noise = 4.0 * f64::EPSILON * problem.likelihood().data().n().max(2) as f64;
    let mut x = start;
    let (fx, gx) = problem.smooth_with_grad(&x)?;
    let mut obj = fx + problem.penalty(&x);
    if !obj.is_finite() {
        return Err(Error::NonFinite {
            iteration: 0,
            step: config.initial_step,
        });
    }
    let mut trace = vec![obj];
    let mut y = x.clone();
    let (mut fy, mut gy) = (fx, gx);
    let mut momentum = 1.0;
    let mut restarted = true;
    let mut step = config.initial_step;
    let mut converged = false;
    let mut diverged = false;
    let mut iterations = 0;
    let mut kkt = f64::NAN;

    for it in 1..=config.max_iters {
        iterations = it;
        step = (step / config.shrink).min(1e12);
        let (z, fz) = loop {
            let trial: Vec<f64> = y.iter().zip(&gy).map(|(yi, gi)| yi - step * gi).collect();
            let z = problem.prox(&trial, step)?;
            let (fz, gz) = problem.smooth_with_grad(&z)?;
            let delta: Vec<f64> = z.iter().zip(&y).map(|(a, b)| a - b).collect();
            let dd = delta.iter().map(|d| d * d).sum::<f64>();
            let model = fy
                + gy.iter().zip(&delta).map(|(g, d)| g * d).sum::<f64>()
                + config.sufficient_decrease / step * dd;
            // Near the optimum the decrease drops below rounding of f, so
            // the curvature along the step is also checked on gradients.
            let curvature: f64 = gz.iter().zip(&gy).zip(&delta).map(|((a, b), d)| (a - b) * d).sum();
            if fz <= model
                || curvature <= 2.0 * config.sufficient_decrease / step * dd
                || step < 1e-20
            {
                break (z, fz);
            }
            step *= config.shrink;
        };
        let obj_z = fz + problem.penalty(&z);
        if !obj_z.is_finite() {
            return Err(Error::NonFinite {
                iteration: it,
                step,
            });
        }
        let previous = obj;
        let x_old = core::mem::take(&mut x);
        // From a restarted point the step is a plain proximal step, which
        // cannot increase the objective beyond rounding.
        let slack = if restarted { noise * obj.abs().max(1.0) } else { 0.0 };
        let improved = obj_z <= obj + slack;
        x = if improved { z.clone() } else { x_old.clone() };
        if improved {
            obj = obj_z;
        }
        trace.push(obj);

        if config.accelerate {
            let next = 0.5 * (1.0 + libm::sqrt(1.0 + 4.0 * momentum * momentum));
            let a = momentum / next;
            let b = (momentum - 1.0) / next;
            y = (0..x.len())
                .map(|k| x[k] + a * (z[k] - x[k]) + b * (x[k] - x_old[k]))
                .collect();
            momentum = if improved { next } else { 1.0 };
            restarted = !improved;
            if !improved {
                y.clone_from(&x);
            }
            let (v, g) = problem.smooth_with_grad(&y)?;
            fy = v;
            gy = g;
        } else if improved {
            y.clone_from(&x);
            let (v, g) = problem.smooth_with_grad(&y)?;
            fy = v;
            gy = g;
        }

        if problem.max_predictor(&x) > config.max_linear_predictor {
            diverged = true;
            break;
        }
        let rel = (previous - obj).abs() / obj.abs().max(1.0);
        if rel < config.tol {
            let (_, g) = problem.smooth_with_grad(&x)?;
            kkt = problem.kkt(&x, &g);
            if kkt <= kkt_tol {
                if problem.recedes(&x, obj)? {
                    diverged = true;
                } else {
                    converged = true;
                }
                break;
            }
        }
    }
    if !converged {
        let (_, g) = problem.smooth_with_grad(&x)?;
        kkt = problem.kkt(&x, &g);
    }
    Ok(FitResult {
        objective: obj,
        beta_hat: x,
        objective_trace: trace,
        kkt_residual: kkt,
        active_groups: Vec::new(),
        iterations,
        converged,
        diverged,
        final_step: step,
        latent_beta: None,
    })
}

/// Subgradient method with step `s0 / sqrt(k)`, keeping the best iterate.
fn subgradient_descent(problem: &impl Composite, config: &FitConfig, start: Vec<f64>) -> Result<FitResult> {
    let mut x = start;
    let (fx, _) = problem.smooth_with_grad(&x)?;
    let mut best = x.clone();
    let mut best_obj = fx + problem.penalty(&x);
    let mut trace = vec![best_obj];
    let mut iterations = 0;
    let mut converged = false;
    let mut kkt = f64::INFINITY;
    for k in 1..=config.max_iters {
        iterations = k;
        let (_, g) = problem.smooth_with_grad(&x)?;
        let sg = problem.subgradient(&x);
        let dir: Vec<f64> = g.iter().zip(&sg).map(|(a, b)| a + b).collect();
        let step = config.initial_step / libm::sqrt(k as f64);
        for (xi, di) in x.iter_mut().zip(&dir) {
            *xi -= step * di;
        }
        let obj = problem.smooth(&x)? + problem.penalty(&x);
        if !obj.is_finite() {
            return Err(Error::NonFinite { iteration: k, step });
        }
        let previous = best_obj;
        if obj < best_obj {
            best_obj = obj;
            best.clone_from(&x);
        }
        trace.push(best_obj);
        if (previous - best_obj).abs() / best_obj.abs().max(1.0) < config.tol && obj >= previous {
            let (_, g) = problem.smooth_with_grad(&best)?;
            kkt = problem.kkt(&best, &g);
            if kkt <= config.kkt_tol() {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        let (_, g) = problem.smooth_with_grad(&best)?;
        kkt = problem.kkt(&best, &g);
    }
    Ok(FitResult {
        objective: best_obj,
        beta_hat: best,
        objective_trace: trace,
        kkt_residual: kkt,
        active_groups: Vec::new(),
        iterations,
        converged,
        diverged: false,
        final_step: config.initial_step / libm::sqrt(iterations.max(1) as f64),
        latent_beta: None,
    })
}

fn start_point(config: &FitConfig, dim: usize) -> Result<Vec<f64>> {
    match &config.start {
        Some(s) => {
            check_len(dim, s.len())?;
            Ok(s.clone())
        }
        None => Ok(vec![0.0; dim]),
    }
}

/// `-L_n(b) + lambda P(b)`.
pub fn objective(
    design: &DesignExpansion,
    ds: &SurvivalDataset,
    spec: &PenaltySpec,
    b: &[f64],
) -> Result<f64> {
    check_len(design.dim(), spec.dim())?;
    let lik = PartialLikelihood::new(design, ds)?;
    Ok(-lik.log_likelihood(b)? + spec.weighted_penalty(b)?)
}

/// `-L_n(b) + lambda * smooth penalty(b)` in original coordinates.
pub fn smooth_objective(
    design: &DesignExpansion,
    ds: &SurvivalDataset,
    spec: &SmoothPenaltySpec,
    b: &[f64],
) -> Result<f64> {
    let lik = PartialLikelihood::new(design, ds)?;
    Ok(-lik.log_likelihood(b)? + spec.lambda * spec.value(b)?)
}

/// Objective in reparametrized coordinates on the reparametrized design.
pub fn reparametrized_objective(
    reparametrized: &DesignExpansion,
    ds: &SurvivalDataset,
    spec: &SmoothPenaltySpec,
    tilde: &[f64],
) -> Result<f64> {
    let lik = PartialLikelihood::new(reparametrized, ds)?;
    Ok(-lik.log_likelihood(tilde)? + spec.lambda * spec.reparametrized_value(tilde)?)
}

/// Minimizes `-L_n(b) + lambda P(b)`.
///
/// Proximal gradient for `rho = identity`; a subgradient method otherwise.
/// Overlapping groups need `FitMode::OverlapLatent`.
pub fn fit(
    design: &DesignExpansion,
    ds: &SurvivalDataset,
    spec: &PenaltySpec,
    config: &FitConfig,
) -> Result<FitResult> {
    config.validate()?;
    check_len(design.dim(), spec.dim())?;
    match config.mode {
        FitMode::SmoothReparametrized => Err(Error::Unsupported(
            "smooth-reparametrized mode needs a smooth penalty; use fit_smooth".to_string(),
        )),
        FitMode::OverlapLatent => {
            let expansion = expand_overlap(spec.groups(), design)?;
            let latent_spec = expansion.latent_penalty(spec)?;
            let mut latent_config = config.clone();
            latent_config.mode = FitMode::Standard;
            latent_config.start = None;
            let latent = fit(&expansion.latent_design, ds, &latent_spec, &latent_config)?;
            let beta = expansion.recover(&latent.beta_hat);
            Ok(FitResult {
                active_groups: latent_spec.active_groups(&latent.beta_hat),
                latent_beta: Some(latent.beta_hat.clone()),
                beta_hat: beta,
                ..latent
            })
        }
        FitMode::Standard => {
            if !spec.groups().is_disjoint() {
                return Err(Error::Unsupported(
                    "overlapping groups need mode overlap_latent".to_string(),
                ));
            }
            let problem = GpfProblem {
                lik: PartialLikelihood::new(design, ds)?,
                spec,
            };
            let start = start_point(config, design.dim())?;
            let mut result = if spec.rho == Rho::Identity {
                proximal_gradient(&problem, config, start)?
            } else {
                subgradient_descent(&problem, config, start)?
            };
            result.active_groups = spec.active_groups(&result.beta_hat);
            Ok(result)
        }
    }
}

/// Fits the smooth-selection penalty in the coordinates `b~_j = R_j b_j`
/// and maps the solution back.
pub fn fit_smooth(
    design: &DesignExpansion,
    ds: &SurvivalDataset,
    spec: &SmoothPenaltySpec,
    config: &FitConfig,
) -> Result<SmoothFit> {
    config.validate()?;
    check_len(design.dim(), spec.dim())?;
    let reparam = reparametrize_design(design, spec.factors())?;
    let problem = SmoothProblem {
        lik: PartialLikelihood::new(&reparam, ds)?,
        spec,
    };
    let start = match &config.start {
        Some(b) => {
            check_len(design.dim(), b.len())?;
            spec.factors().to_tilde(b)
        }
        None => vec![0.0; design.dim()],
    };
    let tilde_result = if spec.rho == Rho::Identity {
        proximal_gradient(&problem, config, start)?
    } else {
        subgradient_descent(&problem, config, start)?
    };
    let beta_tilde = tilde_result.beta_hat.clone();
    let beta = spec.factors().from_tilde(&beta_tilde)?;
    let objective_original = smooth_objective(design, ds, spec, &beta)?;
    let objective_reparametrized = reparametrized_objective(&reparam, ds, spec, &beta_tilde)?;
    let result = FitResult {
        active_groups: spec.active_groups(&beta_tilde),
        beta_hat: beta,
        ..tilde_result
    };
    Ok(SmoothFit {
        result,
        beta_tilde,
        objective_original,
        objective_reparametrized,
    })
}

/// Smallest global `lambda` for which `b = 0` solves the problem:
/// `max_j ||grad L_n(0)_j||_{gamma_j*} / (|G_j|^{1/gamma_j*} rho'(0+))`.
pub fn zero_threshold(design: &DesignExpansion, ds: &SurvivalDataset, spec: &PenaltySpec) -> Result<f64> {
    check_len(design.dim(), spec.dim())?;
    let lik = PartialLikelihood::new(design, ds)?;
    let score = lik.score(&vec![0.0; design.dim()])?;
    let rp = spec.rho.right_derivative_at_zero();
    Ok((0..spec.groups().len())
        .map(|j| spec.dual_block_norm(&score, j) / (spec.scaling(j) * rp))
        .fold(0.0, f64::max))
}

/// Warm-started fits along a descending `lambda` grid.
pub fn fit_path(
    design: &DesignExpansion,
    ds: &SurvivalDataset,
    spec: &PenaltySpec,
    grid: &[f64],
    config: &FitConfig,
) -> Result<Vec<FitResult>> {
    if grid.windows(2).any(|w| w[1] > w[0]) {
        return Err(invalid("lambda grid", "must be sorted in descending order"));
    }
    let mut out: Vec<FitResult> = Vec::with_capacity(grid.len());
    let mut cfg = config.clone();
    for &lambda in grid {
        let s = spec.with_lambda(lambda)?;
        let r = fit(design, ds, &s, &cfg)?;
        if cfg.mode == FitMode::Standard {
            cfg.start = Some(r.beta_hat.clone());
        }
        out.push(r);
    }
    Ok(out)
}
