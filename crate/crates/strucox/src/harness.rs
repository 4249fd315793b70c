//! Monte-Carlo replicates of the sparse additive model.
//!
//! Replicate `k` of a run seeded with `seed` simulates its sample with seed
//! `seed + k`, so any single replicate can be replayed on its own.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use strucox_core::basis::{expand_design, BasisFamily, DesignExpansion, DictionarySpec};
use strucox_core::penalty::{Exponent, PenaltySpec, SmoothPenaltySpec};
use strucox_core::solver::{fit, fit_smooth, lambda_from_theory, FitConfig, FitResult, LambdaRule, RuleKind};
use strucox_core::survival::{
    simulate_with_truth, BaselineHazard, CensoringLaw, CovariateLaw, RiskFunction, SimulationConfig,
    TrueModel,
};
use strucox_core::survival::{CovariateBounds, SurvivalDataset};
use strucox_core::theory::{log_log_slope, mean_and_std_error};
use strucox_core::Result;

/// `g(x) = sum_{j < s} f_j(x_j)` with each `f_j` in the span of the dictionary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SparseModel {
    pub p: usize,
    pub d: usize,
    pub s: usize,
    pub family: BasisFamily,
    /// Largest absolute coefficient of a true component.
    pub signal: f64,
    pub baseline_rate: f64,
    /// Exponential censoring rate; 0 disables censoring.
    pub censoring_rate: f64,
    /// Center and scale the design columns before fitting.
    pub standardize: bool,
}

impl Default for SparseModel {
    fn default() -> Self {
        Self {
            p: 50,
            d: 4,
            s: 2,
            family: BasisFamily::Bspline,
            signal: 1.0,
            baseline_rate: 1.0,
            censoring_rate: 0.25,
            standardize: true,
        }
    }
}

impl SparseModel {
    pub fn dictionary(&self) -> Result<DictionarySpec> {
        DictionarySpec::new(self.family, self.d, 0.0, 1.0)
    }

    /// True coefficients: alternating bowl and ramp shapes with zero-sum
    /// blocks on the first `s` groups.
    pub fn beta_star(&self) -> Vec<f64> {
        let d = self.d;
        let mut b = vec![0.0; self.p * d];
        if d < 2 {
            for v in b.iter_mut().take(self.s) {
                *v = self.signal;
            }
            return b;
        }
        for j in 0..self.s.min(self.p) {
            let mid = (d - 1) as f64 / 2.0;
            let raw: Vec<f64> = (0..d)
                .map(|k| {
                    let t = k as f64 - mid;
                    if j % 2 == 0 {
                        t * t
                    } else {
                        t
                    }
                })
                .collect();
            let mean = raw.iter().sum::<f64>() / d as f64;
            let centered: Vec<f64> = raw.iter().map(|v| v - mean).collect();
            let top = centered.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for k in 0..d {
                b[j * d + k] = self.signal * centered[k] / top;
            }
        }
        b
    }

    pub fn simulation(&self, n: usize, seed: u64) -> Result<SimulationConfig> {
        let risk = if self.signal == 0.0 || self.s == 0 {
            RiskFunction::Zero
        } else {
            RiskFunction::Additive {
                dictionary: self.dictionary()?,
                coefficients: self.beta_star(),
            }
        };
        let censoring = if self.censoring_rate > 0.0 {
            CensoringLaw::Exponential {
                rate: self.censoring_rate,
            }
        } else {
            CensoringLaw::None
        };
        Ok(SimulationConfig {
            n,
            p: self.p,
            bounds: CovariateBounds::default(),
            covariate_law: CovariateLaw::Uniform,
            true_model: TrueModel {
                baseline: BaselineHazard::Constant {
                    rate: self.baseline_rate,
                },
                risk,
                censoring,
            },
            study_end: None,
            seed,
        })
    }

    /// Simulated sample, its design and the true risk scores.
    pub fn draw(&self, n: usize, seed: u64) -> Result<Sample> {
        let out = simulate_with_truth(&self.simulation(n, seed)?)?;
        let raw = expand_design(&out.dataset, &self.dictionary()?)?;
        let design = if self.standardize { raw.standardized() } else { raw };
        Ok(Sample {
            dataset: out.dataset,
            design,
            g: out.risk_scores,
        })
    }
}

pub struct Sample {
    pub dataset: SurvivalDataset,
    pub design: DesignExpansion,
    pub g: Vec<f64>,
}

/// Penalty instantiations compared in the rate experiment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyVariant {
    /// `gamma = 2`. With a single response this is also the multi-task
    /// l1/l2 penalty.
    #[default]
    GroupLasso,
    /// Block l1/l-infinity, `gamma = infinity`.
    BlockLinf,
    Lasso,
    /// Smooth selection with `R_j = M_j = I`.
    ElasticNet,
}

impl PenaltyVariant {
    pub fn gamma(self) -> Exponent {
        match self {
            Self::GroupLasso | Self::ElasticNet => Exponent::TWO,
            Self::BlockLinf => Exponent::INF,
            Self::Lasso => Exponent::ONE,
        }
    }
}

/// Tuning-parameter rule constants that are not determined by the sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuleConstants {
    pub rule: RuleKind,
    pub a: f64,
    pub lambda0: f64,
    /// `exp ||beta*||_1` when absent.
    pub u: Option<f64>,
}

impl Default for RuleConstants {
    fn default() -> Self {
        Self {
            rule: RuleKind::Theorem1,
            a: 0.15,
            lambda0: 1.0,
            u: Some(1.0),
        }
    }
}

impl RuleConstants {
    pub fn lambda(&self, model: &SparseModel, n: usize) -> Result<f64> {
        let u = self
            .u
            .unwrap_or_else(|| strucox_core::solver::plug_in_u(&model.beta_star()));
        let mut rule = LambdaRule::new(self.rule);
        rule.a = Some(self.a);
        rule.u = Some(u);
        rule.lambda0 = Some(self.lambda0);
        rule.n = Some(n);
        rule.p = Some(model.p);
        rule.d = Some(model.d);
        rule.gammas = vec![Exponent::TWO];
        rule.group_sizes = vec![model.d; model.p];
        Ok(lambda_from_theory(&rule)?.lambda)
    }
}

/// One fitted replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateFit {
    pub n: usize,
    pub seed: u64,
    pub lambda: f64,
    /// `||f_beta_hat - g||^2` over the sample.
    pub error: f64,
    pub converged: bool,
    pub zero: bool,
    pub active_groups: usize,
}

pub fn fit_sample(sample: &Sample, variant: PenaltyVariant, lambda: f64, config: &FitConfig) -> Result<FitResult> {
    let (p, d) = (sample.design.p(), sample.design.d());
    match variant {
        PenaltyVariant::ElasticNet => {
            let spec = SmoothPenaltySpec::identity_factors(p, d, lambda)?;
            fit_smooth(&sample.design, &sample.dataset, &spec, config).map(|s| s.result)
        }
        _ => {
            let spec = PenaltySpec::uniform(p, d, variant.gamma(), lambda)?;
            fit(&sample.design, &sample.dataset, &spec, config)
        }
    }
}

pub fn run_replicate(
    model: &SparseModel,
    rule: &RuleConstants,
    variant: PenaltyVariant,
    n: usize,
    seed: u64,
    config: &FitConfig,
) -> Result<ReplicateFit> {
    let sample = model.draw(n, seed)?;
    let lambda = rule.lambda(model, n)?;
    let r = fit_sample(&sample, variant, lambda, config)?;
    let f = sample.design.linear_predictor(&r.beta_hat);
    // Risk functions are identified up to an additive constant.
    let offset = f.iter().zip(&sample.g).map(|(a, b)| a - b).sum::<f64>() / n as f64;
    let diff: Vec<f64> = f.iter().zip(&sample.g).map(|(a, b)| a - b - offset).collect();
    Ok(ReplicateFit {
        n,
        seed,
        lambda,
        error: strucox_core::likelihood::PartialLikelihood::euclidean_norm_sq(&diff),
        converged: r.converged,
        zero: r.beta_hat.iter().all(|&b| b == 0.0),
        active_groups: r.active_groups.len(),
    })
}

/// Rate experiment settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateConfig {
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub model: SparseModel,
    pub rule: RuleConstants,
    pub variant: PenaltyVariant,
    pub slope_range: [f64; 2],
}

impl Default for RateConfig {
    fn default() -> Self {
        Self {
            n_grid: vec![200, 400, 800, 1600],
            replicates: 50,
            model: SparseModel::default(),
            rule: RuleConstants::default(),
            variant: PenaltyVariant::GroupLasso,
            slope_range: [-1.3, -0.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    pub lambda: f64,
    pub mean_error: f64,
    pub std_error: f64,
    pub used: usize,
    /// Non-converged replicates, left out of the mean.
    pub dropped: usize,
    pub zero_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
    pub slope: Option<f64>,
    pub strictly_decreasing: bool,
    pub slope_in_range: bool,
}

/// Replicate seeds for every `(n, r)` cell, `n` major.
fn cells(n_grid: &[usize], replicates: usize, seed: u64) -> Vec<(usize, u64)> {
    n_grid
        .iter()
        .enumerate()
        .flat_map(|(k, &n)| {
            (0..replicates).map(move |r| (n, seed.wrapping_add((k * replicates + r) as u64)))
        })
        .collect()
}

pub fn rate_experiment(cfg: &RateConfig, fit_config: &FitConfig, seed: u64) -> Result<RateTable> {
    let fits: Vec<ReplicateFit> = cells(&cfg.n_grid, cfg.replicates, seed)
        .into_par_iter()
        .map(|(n, s)| run_replicate(&cfg.model, &cfg.rule, cfg.variant, n, s, fit_config))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for &n in &cfg.n_grid {
        let cell: Vec<&ReplicateFit> = fits.iter().filter(|f| f.n == n).collect();
        let errors: Vec<f64> = cell.iter().filter(|f| f.converged).map(|f| f.error).collect();
        let (mean, se) = mean_and_std_error(&errors);
        rows.push(RateRow {
            n,
            lambda: cell.first().map_or(f64::NAN, |f| f.lambda),
            mean_error: mean,
            std_error: se,
            used: errors.len(),
            dropped: cell.len() - errors.len(),
            zero_fraction: cell.iter().filter(|f| f.zero).count() as f64 / cell.len().max(1) as f64,
        });
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let means: Vec<f64> = rows.iter().map(|r| r.mean_error).collect();
    let slope = log_log_slope(&ns, &means).ok();
    let strictly_decreasing = means.windows(2).all(|w| w[1] < w[0]);
    let slope_in_range = slope.is_some_and(|s| s >= cfg.slope_range[0] && s <= cfg.slope_range[1]);
    Ok(RateTable {
        rows,
        slope,
        strictly_decreasing,
        slope_in_range,
    })
}

/// Null-model settings: `g = 0`, theory `lambda`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NullConfig {
    pub n: usize,
    pub replicates: usize,
    pub model: SparseModel,
    pub rule: RuleConstants,
    pub min_zero_fraction: f64,
}

impl Default for NullConfig {
    fn default() -> Self {
        Self {
            n: 400,
            replicates: 100,
            model: SparseModel {
                signal: 0.0,
                ..SparseModel::default()
            },
            rule: RuleConstants::default(),
            min_zero_fraction: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullReport {
    pub lambda: f64,
    pub replicates: usize,
    pub zero_count: usize,
    pub zero_fraction: f64,
    pub non_converged: usize,
    pub pass: bool,
}

pub fn null_experiment(cfg: &NullConfig, fit_config: &FitConfig, seed: u64) -> Result<NullReport> {
    let mut model = cfg.model.clone();
    model.signal = 0.0;
    let fits: Vec<ReplicateFit> = cells(&[cfg.n], cfg.replicates, seed)
        .into_par_iter()
        .map(|(n, s)| run_replicate(&model, &cfg.rule, PenaltyVariant::GroupLasso, n, s, fit_config))
        .collect::<Result<_>>()?;
    let zero_count = fits.iter().filter(|f| f.zero).count();
    let zero_fraction = zero_count as f64 / fits.len().max(1) as f64;
    Ok(NullReport {
        lambda: fits.first().map_or(f64::NAN, |f| f.lambda),
        replicates: fits.len(),
        zero_count,
        zero_fraction,
        non_converged: fits.iter().filter(|f| !f.converged).count(),
        pass: zero_fraction >= cfg.min_zero_fraction,
    })
}

/// Rate table as CSV: one row per `n`, slope repeated on every row so the
/// file plots directly (`n` in column 1, mean error in column 3).
pub fn rate_csv(table: &RateTable) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "n",
        "lambda",
        "mean_error",
        "std_error",
        "used",
        "dropped",
        "zero_fraction",
        "slope",
    ])
    .expect("in-memory write");
    let slope = table.slope.map_or(String::new(), |s| s.to_string());
    for r in &table.rows {
        w.write_record([
            r.n.to_string(),
            r.lambda.to_string(),
            r.mean_error.to_string(),
            r.std_error.to_string(),
            r.used.to_string(),
            r.dropped.to_string(),
            r.zero_fraction.to_string(),
            slope.clone(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii csv")
}
