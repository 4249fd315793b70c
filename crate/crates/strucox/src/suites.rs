//! Verification suites behind `strucox verify`.
//!
//! Each suite returns a JSON report and the list of hard invariants that
//! failed; an empty list means success.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use strucox_core::basis::DesignExpansion;
use strucox_core::likelihood::PartialLikelihood;
use strucox_core::linalg::Matrix;
use strucox_core::penalty::{Exponent, PenaltySpec};
use strucox_core::rng::{replicate_rng, stream_rng, streams, ChaCha8Rng};
use strucox_core::solver::FitConfig;
use strucox_core::survival::{simulate_with_truth, CovariateBounds, SurvivalDataset, SurvivalRecord};
use strucox_core::theory::{
    check_lemma1, check_sandwich, estimate_re_constant, estimate_re_from_matrix, min_weight_prop1,
    oracle_bound_report, risk_mean_curve, sample_omega_lower, subject_weight, sup_deviation, BoundInputs, Cone,
    OracleSpec,
};

use crate::error::{CliError, Result};
use crate::harness::{
    fit_sample, null_experiment, rate_csv, rate_experiment, NullConfig, PenaltyVariant, RateConfig, RuleConstants,
    SparseModel,
};

pub const SUITES: [&str; 8] = ["sandwich", "re", "lemma1", "prop1", "oracle", "rate", "concentration", "all"];

/// Settings of every suite.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerificationConfig {
    pub sandwich: SandwichSuite,
    pub re: ReSuite,
    pub lemma1: Lemma1Suite,
    pub prop1: Prop1Suite,
    pub oracle: OracleSuite,
    pub rate: RateSuite,
    pub concentration: ConcentrationSuite,
}

/// Outcome of one suite.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteOutcome {
    pub suite: String,
    pub passed: bool,
    pub failures: Vec<String>,
    pub report: Value,
    /// Rate table for `rate`.
    #[serde(skip)]
    pub csv: Option<String>,
}

impl SuiteOutcome {
    fn new(suite: &str, failures: Vec<String>, report: Value) -> Self {
        Self {
            suite: suite.to_string(),
            passed: failures.is_empty(),
            failures,
            report,
            csv: None,
        }
    }
}

/// Runs `name` (one of [`SUITES`] except `all`).
pub fn run_suite(name: &str, cfg: &VerificationConfig, fit: &FitConfig, seed: u64) -> Result<SuiteOutcome> {
    match name {
        "sandwich" => sandwich(&cfg.sandwich, seed),
        "re" => re(&cfg.re, seed),
        "lemma1" => lemma1(&cfg.lemma1, seed),
        "prop1" => prop1(&cfg.prop1, seed),
        "oracle" => oracle(&cfg.oracle, fit, seed),
        "rate" => rate(&cfg.rate, fit, seed),
        "concentration" => concentration(&cfg.concentration, seed),
        other => Err(CliError::config(format!(
            "unknown suite `{other}`; expected one of {}",
            SUITES.join(", ")
        ))),
    }
}

/// Tie-free instance with design entries in `[-1, 1]`, times in
/// `(0.01, 10)`, events with probability 0.7 and subject 0 an event.
pub fn random_instance(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Result<(DesignExpansion, SurvivalDataset)> {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let mut records: Vec<SurvivalRecord> = (0..n)
        .map(|_| SurvivalRecord::new(rng.random_range(0.01..10.0), rng.random::<f64>() < 0.7, vec![0.5]))
        .collect();
    records[0].event = true;
    let design = DesignExpansion::from_matrix(Matrix::from_rows(&rows)?, dim, 1)?;
    let ds = SurvivalDataset::new(records, CovariateBounds::default(), None)?;
    Ok((design, ds))
}

fn uniform_vec(rng: &mut ChaCha8Rng, dim: usize, half: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-half..half)).collect()
}

fn nine_point_grid() -> Vec<f64> {
    (1..10).map(|k| k as f64 / 10.0).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SandwichSuite {
    pub instances: usize,
    pub max_n: usize,
    pub max_dim: usize,
    pub c_grid: Vec<f64>,
    /// Agreement required between the variance and per-time moment forms
    /// of the empirical norm.
    pub forms_tol: f64,
}

impl Default for SandwichSuite {
    fn default() -> Self {
        Self {
            instances: 500,
            max_n: 30,
            max_dim: 8,
            c_grid: nine_point_grid(),
            forms_tol: 1e-10,
        }
    }
}

pub fn sandwich(cfg: &SandwichSuite, seed: u64) -> Result<SuiteOutcome> {
    if cfg.max_n < 5 || cfg.max_dim == 0 {
        return Err(CliError::config("verification.sandwich: need max_n >= 5 and max_dim >= 1"));
    }
    struct One {
        lower: usize,
        upper: usize,
        centered: usize,
        forms_gap: f64,
        worst_lower: Option<(f64, f64, f64)>,
    }
    let results: Vec<One> = (0..cfg.instances)
        .into_par_iter()
        .map(|k| -> Result<One> {
            let mut rng = replicate_rng(seed, k as u64, streams::INSTANCES);
            let n = rng.random_range(5..=cfg.max_n);
            let dim = rng.random_range(1..=cfg.max_dim);
            let (x, ds) = random_instance(&mut rng, n, dim)?;
            let b = uniform_vec(&mut rng, dim, 2.0);
            let bs = uniform_vec(&mut rng, dim, 1.0);
            let r = check_sandwich(&x, &ds, &b, &bs, &cfg.c_grid)?;
            let lik = PartialLikelihood::new(&x, &ds)?;
            let f = x.linear_predictor(&b.iter().zip(&bs).map(|(a, s)| a - s).collect::<Vec<_>>());
            let forms = lik.empirical_norm_forms(&f, &bs)?;
            let worst_lower = r
                .entries
                .iter()
                .filter(|e| !e.lower_pass)
                .map(|e| (e.c, e.lower, e.middle))
                .max_by(|a, b| (a.1 - a.2).total_cmp(&(b.1 - b.2)));
            Ok(One {
                lower: r.entries.iter().filter(|e| !e.lower_pass).count(),
                upper: r.entries.iter().filter(|e| !e.upper_pass).count(),
                centered: r.entries.iter().filter(|e| !e.centered_upper_pass).count(),
                forms_gap: (forms.variance - forms.moment).abs(),
                worst_lower,
            })
        })
        .collect::<Result<_>>()?;
    let checks = cfg.instances * cfg.c_grid.len();
    let lower: usize = results.iter().map(|r| r.lower).sum();
    let upper: usize = results.iter().map(|r| r.upper).sum();
    let centered: usize = results.iter().map(|r| r.centered).sum();
    let forms_gap = results.iter().map(|r| r.forms_gap).fold(0.0, f64::max);
    let example = results
        .iter()
        .enumerate()
        .find_map(|(k, r)| r.worst_lower.map(|(c, lo, mid)| json!({"instance": k, "c": c, "lower": lo, "middle": mid})));
    let mut failures = Vec::new();
    if lower > 0 {
        failures.push(format!("lower sandwich bound violated in {lower} of {checks} checks"));
    }
    if upper > 0 {
        failures.push(format!("upper sandwich bound violated in {upper} of {checks} checks"));
    }
    if centered > 0 {
        failures.push(format!("centered upper bound violated in {centered} of {checks} checks"));
    }
    if forms_gap > cfg.forms_tol {
        failures.push(format!("norm forms differ by {forms_gap:e}"));
    }
    let report = json!({
        "instances": cfg.instances,
        "checks": checks,
        "lower_violations": lower,
        "upper_violations": upper,
        "centered_upper_violations": centered,
        "max_norm_forms_gap": forms_gap,
        "first_lower_violation": example,
    });
    Ok(SuiteOutcome::new("sandwich", failures, report))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReSuite {
    pub n: usize,
    pub model: SparseModel,
    pub mu: f64,
    /// Random cone directions for the small and the large run.
    pub samples: [usize; 2],
}

impl Default for ReSuite {
    fn default() -> Self {
        Self {
            n: 200,
            model: SparseModel {
                p: 10,
                standardize: false,
                ..SparseModel::default()
            },
            mu: 7.0,
            samples: [200, 2000],
        }
    }
}

pub fn re(cfg: &ReSuite, seed: u64) -> Result<SuiteOutcome> {
    let m = &cfg.model;
    let sample = m.draw(cfg.n, seed)?;
    let spec = PenaltySpec::group_lasso(m.p, m.d, 1.0)?;
    let beta_star = m.beta_star();
    let support: Vec<usize> = (0..m.s.min(m.p)).collect();
    let few = estimate_re_constant(&sample.design, &sample.dataset, &beta_star, &support, &spec, cfg.mu, cfg.samples[0], seed)?;
    let many = estimate_re_constant(&sample.design, &sample.dataset, &beta_star, &support, &spec, cfg.mu, cfg.samples[1], seed)?;
    let cone = Cone::new(&spec, &support, cfg.mu)?;
    let identity = estimate_re_from_matrix(&Matrix::identity(m.p * m.d), &support[..1], &spec, cfg.mu, 500, seed)?;
    let zero = estimate_re_from_matrix(&Matrix::zeros(m.p * m.d, m.p * m.d), &support[..1], &spec, cfg.mu, 100, seed)?;

    let mut failures = Vec::new();
    if !(few.zeta_hat >= 0.0 && many.zeta_hat >= 0.0) {
        failures.push("negative zeta estimate".to_string());
    }
    if many.zeta_hat > few.zeta_hat {
        failures.push(format!("more directions raised zeta: {} > {}", many.zeta_hat, few.zeta_hat));
    }
    if !cone.contains(&many.min_direction) {
        failures.push("minimizing direction is outside the cone".to_string());
    }
    if (identity.zeta_sq - 1.0).abs() > 1e-12 {
        failures.push(format!("identity matrix gave zeta^2 = {}", identity.zeta_sq));
    }
    if zero.zeta_hat != 0.0 {
        failures.push(format!("zero matrix gave zeta = {}", zero.zeta_hat));
    }
    let report = json!({
        "label": "sampled",
        "small": few,
        "large": many,
        "identity_zeta_sq": identity.zeta_sq,
        "zero_zeta": zero.zeta_hat,
    });
    Ok(SuiteOutcome::new("re", failures, report))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Lemma1Suite {
    pub p: usize,
    pub d: usize,
    pub lambda: f64,
    pub samples: usize,
    /// Threshold multiple for every group.
    pub below: f64,
    /// Threshold multiple for `group` in the violating case.
    pub above: f64,
    pub group: usize,
}

impl Default for Lemma1Suite {
    fn default() -> Self {
        Self {
            p: 3,
            d: 2,
            lambda: 0.3,
            samples: 10_000,
            below: 0.9,
            above: 1.5,
            group: 1,
        }
    }
}

pub fn lemma1(cfg: &Lemma1Suite, seed: u64) -> Result<SuiteOutcome> {
    if cfg.group >= cfg.p {
        return Err(CliError::config("verification.lemma1.group: out of range"));
    }
    let spec = PenaltySpec::uniform(cfg.p, cfg.d, Exponent::TWO, cfg.lambda)?;
    let mut rng = stream_rng(seed, streams::INSTANCES);
    let dim = cfg.p * cfg.d;
    let v0 = uniform_vec(&mut rng, dim, 1.0);
    let beta_star = uniform_vec(&mut rng, dim, 1.0);
    let scaled = |boost: Option<usize>| {
        let mut v = v0.clone();
        for j in 0..cfg.p {
            let factor = if boost == Some(j) { cfg.above } else { cfg.below };
            let s = factor * spec.threshold(j) / spec.dual_block_norm(&v0, j);
            for &c in spec.groups().group(j) {
                v[c] *= s;
            }
        }
        v
    };
    let holds = check_lemma1(&spec, &beta_star, &scaled(None), cfg.samples, seed)?;
    let broken = check_lemma1(&spec, &beta_star, &scaled(Some(cfg.group)), cfg.samples, seed)?;
    let mut failures = Vec::new();
    if !holds.all_events_hold || holds.violations > 0 {
        failures.push(format!(
            "below thresholds: {} violations in {} samples",
            holds.violations, holds.samples
        ));
    }
    if broken.violations == 0 {
        failures.push("above threshold: no violating x found".to_string());
    }
    let report = json!({ "below_thresholds": holds, "above_threshold": broken });
    Ok(SuiteOutcome::new("lemma1", failures, report))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Prop1Suite {
    pub instances: usize,
    pub n: usize,
    /// Squared radius of the ball.
    pub b_n: f64,
    pub grid_step: f64,
    pub tol: f64,
}

impl Default for Prop1Suite {
    fn default() -> Self {
        Self {
            instances: 20,
            n: 3,
            b_n: 4.0,
            grid_step: 1e-3,
            tol: 1e-4,
        }
    }
}

pub fn prop1(cfg: &Prop1Suite, seed: u64) -> Result<SuiteOutcome> {
    let radius = cfg.b_n.sqrt();
    let steps = (2.0 * radius / cfg.grid_step).round() as usize;
    let gaps: Vec<f64> = (0..cfg.instances)
        .into_par_iter()
        .map(|k| -> Result<f64> {
            let mut rng = replicate_rng(seed, k as u64, streams::INSTANCES);
            let (x, ds) = random_instance(&mut rng, cfg.n.max(1), 1)?;
            let r = min_weight_prop1(&x, &ds, 0, cfg.b_n, seed)?;
            let mut grid = f64::INFINITY;
            for s in 0..=steps {
                let b = (-radius + s as f64 * cfg.grid_step).min(radius);
                grid = grid.min(subject_weight(&x, &ds, 0, &[b])?.0);
            }
            Ok((r.numeric_min - grid).abs())
        })
        .collect::<Result<_>>()?;
    let single = {
        let design = DesignExpansion::from_matrix(Matrix::from_rows(&[vec![0.7]])?, 1, 1)?;
        let ds = SurvivalDataset::new(vec![SurvivalRecord::new(1.0, true, vec![0.5])], CovariateBounds::default(), None)?;
        min_weight_prop1(&design, &ds, 0, cfg.b_n, seed)?.numeric_min
    };
    let worst = gaps.iter().copied().fold(0.0, f64::max);
    let mut failures = Vec::new();
    if worst > cfg.tol {
        failures.push(format!("numeric minimum differs from the grid by {worst:e}"));
    }
    if single != 1.0 {
        failures.push(format!("single subject gave {single}, expected 1"));
    }
    let report = json!({
        "instances": cfg.instances,
        "max_grid_gap": worst,
        "single_subject_min": single,
    });
    Ok(SuiteOutcome::new("prop1", failures, report))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSuite {
    pub replicates: usize,
    pub n: usize,
    pub model: SparseModel,
    pub rule: RuleConstants,
    pub mu: f64,
    pub re_samples: usize,
    pub omega_vectors: usize,
    /// Radius of the ball the weight bound is sampled over.
    pub omega_radius: f64,
}

impl Default for OracleSuite {
    fn default() -> Self {
        Self {
            replicates: 20,
            n: 400,
            model: SparseModel {
                standardize: false,
                ..SparseModel::default()
            },
            rule: RuleConstants::default(),
            mu: 7.0,
            re_samples: 500,
            omega_vectors: 200,
            omega_radius: 1.0,
        }
    }
}

pub fn oracle(cfg: &OracleSuite, fit: &FitConfig, seed: u64) -> Result<SuiteOutcome> {
    let m = &cfg.model;
    let lambda = cfg.rule.lambda(m, cfg.n)?;
    let reports: Vec<Value> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| -> Result<Value> {
            let s = seed.wrapping_add(r as u64);
            let sample = m.draw(cfg.n, s)?;
            let spec = PenaltySpec::group_lasso(m.p, m.d, lambda)?;
            let oracle = OracleSpec::new(m.beta_star(), &spec)?;
            let result = fit_sample(&sample, PenaltyVariant::GroupLasso, lambda, fit)?;
            let re = estimate_re_constant(
                &sample.design,
                &sample.dataset,
                &oracle.beta_star,
                &oracle.support,
                &spec,
                cfg.mu,
                cfg.re_samples,
                s,
            )?;
            let cone = Cone::new(&spec, &oracle.support, cfg.mu)?;
            let omega = sample_omega_lower(
                &sample.design,
                &sample.dataset,
                &oracle.beta_star,
                &cone,
                cfg.omega_radius,
                cfg.omega_vectors,
                &nine_point_grid(),
                s,
            )?;
            let bound = oracle_bound_report(&BoundInputs {
                design: &sample.design,
                ds: &sample.dataset,
                g: &sample.g,
                oracle: &oracle,
                spec: &spec,
                beta_hat: &result.beta_hat,
                zeta: re.zeta_hat,
                omega_lower: omega.omega_lower,
            })?;
            Ok(json!({
                "seed": s,
                "converged": result.converged,
                "bound": bound,
            }))
        })
        .collect::<Result<_>>()?;
    let count = |key: &str| reports.iter().filter(|r| r["bound"][key] == json!(false)).count();
    let mut failures = Vec::new();
    for r in &reports {
        let b = &r["bound"];
        let finite = ["rhs", "lemma5_rhs"]
            .iter()
            .all(|k| b[k].as_f64().is_some_and(f64::is_finite));
        if !finite {
            failures.push(format!("seed {}: non-finite bound", r["seed"]));
        }
        for k in ["v1", "v2"] {
            if let Some(v) = b[k].as_f64() {
                if !(0.0..=1.0).contains(&v) {
                    failures.push(format!("seed {}: {k} = {v} outside [0, 1]", r["seed"]));
                }
            }
        }
    }
    let n = reports.len().max(1) as f64;
    let report = json!({
        "lambda": lambda,
        "replicates": reports.len(),
        "theorem1_violation_frequency": count("holds") as f64 / n,
        "theorem2_violation_frequency": count("theorem2_holds") as f64 / n,
        "lemma5_violation_frequency": count("lemma5_holds") as f64 / n,
        // exp(C e^C 26 r_n) overflows once r_n is in the tens.
        "theorem2_rhs_infinite": reports.iter().filter(|r| r["bound"]["theorem2_rhs"].is_null()).count(),
        "replicate_reports": reports,
    });
    Ok(SuiteOutcome::new("oracle", failures, report))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateSuite {
    /// Primary table; its slope and monotonicity are hard checks.
    pub primary: RateConfig,
    pub null: NullConfig,
    /// Further penalties, reported without hard checks.
    pub variants: Vec<PenaltyVariant>,
    pub variant_replicates: usize,
}

impl Default for RateSuite {
    fn default() -> Self {
        Self {
            primary: RateConfig::default(),
            null: NullConfig::default(),
            variants: vec![PenaltyVariant::BlockLinf, PenaltyVariant::ElasticNet],
            variant_replicates: 10,
        }
    }
}

pub fn rate(cfg: &RateSuite, fit: &FitConfig, seed: u64) -> Result<SuiteOutcome> {
    let table = rate_experiment(&cfg.primary, fit, seed)?;
    let null = null_experiment(&cfg.null, fit, seed)?;
    let mut others = Vec::new();
    for &variant in &cfg.variants {
        let c = RateConfig {
            variant,
            replicates: cfg.variant_replicates,
            ..cfg.primary.clone()
        };
        let t = rate_experiment(&c, fit, seed)?;
        others.push(json!({ "variant": variant, "table": t }));
    }
    let mut failures = Vec::new();
    if !table.strictly_decreasing {
        failures.push("mean error is not strictly decreasing in n".to_string());
    }
    if !table.slope_in_range {
        failures.push(format!(
            "log-log slope {} outside [{}, {}]",
            table.slope.map_or("undefined".to_string(), |s| format!("{s:.4}")),
            cfg.primary.slope_range[0],
            cfg.primary.slope_range[1]
        ));
    }
    if !null.pass {
        failures.push(format!(
            "null model: beta_hat = 0 in {:.1}% of fits, need {:.1}%",
            100.0 * null.zero_fraction,
            100.0 * cfg.null.min_zero_fraction
        ));
    }
    let csv = rate_csv(&table);
    let report = json!({
        "variant": cfg.primary.variant,
        "table": table,
        "null": &null,
        "other_variants": others,
    });
    let mut out = SuiteOutcome::new("rate", failures, report);
    out.csv = Some(csv);
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConcentrationSuite {
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    /// Size of the sample standing in for the population.
    pub reference_n: usize,
    pub model: SparseModel,
    /// The time grid is made of reference-sample time quantiles evenly
    /// spaced up to this level.
    pub max_quantile: f64,
    pub grid_points: usize,
}

impl Default for ConcentrationSuite {
    fn default() -> Self {
        Self {
            n_grid: vec![100, 1_000, 10_000],
            replicates: 100,
            reference_n: 1_000_000,
            model: SparseModel {
                p: 2,
                s: 1,
                standardize: false,
                ..SparseModel::default()
            },
            max_quantile: 0.75,
            grid_points: 10,
        }
    }
}

/// `E_n(beta*, t)` on `grid` for a simulated sample; design rows are
/// expanded on demand.
fn sample_curve(m: &SparseModel, n: usize, seed: u64, grid_of: impl Fn(&[f64]) -> Vec<f64>) -> Result<(Vec<Option<Vec<f64>>>, Vec<f64>)> {
    let out = simulate_with_truth(&m.simulation(n, seed)?)?;
    let dict = m.dictionary()?;
    let recs = out.dataset.records();
    let times: Vec<f64> = recs.iter().map(|r| r.time).collect();
    let grid = grid_of(&times);
    let beta = m.beta_star();
    let d = m.d;
    let curve = risk_mean_curve(&times, &beta, &grid, |i, row| {
        for (j, &x) in recs[i].covariates.iter().enumerate() {
            dict.evaluate_into(x, &mut row[j * d..(j + 1) * d])
                .expect("covariates lie in the dictionary domain");
        }
    })?;
    Ok((curve, grid))
}

pub fn concentration(cfg: &ConcentrationSuite, seed: u64) -> Result<SuiteOutcome> {
    if cfg.grid_points == 0 || !(cfg.max_quantile > 0.0 && cfg.max_quantile < 1.0) {
        return Err(CliError::config("verification.concentration: bad time grid"));
    }
    let m = &cfg.model;
    let quantiles = |times: &[f64]| {
        let mut sorted = times.to_vec();
        sorted.sort_by(f64::total_cmp);
        (1..=cfg.grid_points)
            .map(|k| {
                let q = cfg.max_quantile * k as f64 / cfg.grid_points as f64;
                sorted[((sorted.len() - 1) as f64 * q) as usize]
            })
            .collect::<Vec<f64>>()
    };
    // The reference sample uses a seed no replicate uses.
    let (reference, grid) = sample_curve(m, cfg.reference_n, seed ^ 0x9e37_79b9_7f4a_7c15, quantiles)?;
    let mut medians = Vec::new();
    let mut rows = Vec::new();
    for (k, &n) in cfg.n_grid.iter().enumerate() {
        let mut devs: Vec<f64> = (0..cfg.replicates)
            .into_par_iter()
            .map(|r| -> Result<f64> {
                let s = seed.wrapping_add((k * cfg.replicates + r) as u64);
                let (curve, _) = sample_curve(m, n, s, |_| grid.clone())?;
                Ok(sup_deviation(&curve, &reference)?)
            })
            .collect::<Result<_>>()?;
        devs.sort_by(f64::total_cmp);
        let median = if devs.is_empty() {
            f64::NAN
        } else if devs.len() % 2 == 1 {
            devs[devs.len() / 2]
        } else {
            0.5 * (devs[devs.len() / 2 - 1] + devs[devs.len() / 2])
        };
        medians.push(median);
        rows.push(json!({ "n": n, "median_sup_deviation": median, "max": devs.last() }));
    }
    let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
    let mut failures = Vec::new();
    if !decreasing {
        failures.push(format!("median sup deviation not strictly decreasing: {medians:?}"));
    }
    let report = json!({
        "reference_n": cfg.reference_n,
        "time_grid": grid,
        "rows": rows,
        "strictly_decreasing": decreasing,
    });
    Ok(SuiteOutcome::new("concentration", failures, report))
}
