//! Command-line entry point.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use strucox_core::basis::smoothing_factors;
use strucox_core::penalty::{PenaltySpec, SmoothPenaltySpec};
use strucox_core::solver::{fit, fit_path, fit_smooth, FitResult, LambdaAudit};
use strucox_core::survival::{simulate_cox_sample, summarize_dataset, CovariateBounds};

use crate::config::{PenaltyKind, RunConfig};
use crate::error::{exit, CliError, Result};
use crate::io::{read_dataset, write_dataset};
use crate::report::{write_csv, write_json, Envelope};
use crate::suites::{run_suite, SuiteOutcome, SUITES};

#[derive(Debug, Parser)]
#[command(name = "strucox", version, about = "Structured penalized Cox estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a dataset from the `simulation` block.
    Simulate(Common),
    /// Fit the penalized model to a dataset.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Dataset CSV.
        #[arg(long)]
        data: PathBuf,
    },
    /// Run a verification suite.
    Verify {
        /// One of sandwich, re, lemma1, prop1, oracle, rate, concentration, all.
        suite: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON run configuration (all defaults when omitted).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (default: `output_dir` from the config, else `.`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

struct Context {
    config: RunConfig,
    envelope: Envelope,
    out: PathBuf,
}

impl Common {
    fn context(&self) -> Result<Context> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        let out = self
            .out
            .clone()
            .or_else(|| config.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("."));
        let envelope = Envelope::new(config.config_hash(), config.seed);
        Ok(Context { config, envelope, out })
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::CONFIG } else { exit::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => exit::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(common) => simulate(&common.context()?),
        Command::Fit { common, data } => fit_command(&common.context()?, data),
        Command::Verify { suite, common } => {
            if !SUITES.contains(&suite.as_str()) {
                return Err(CliError::config(format!(
                    "unknown suite `{suite}`; expected one of {}",
                    SUITES.join(", ")
                )));
            }
            verify(&common.context()?, suite)
        }
    }
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn simulate(ctx: &Context) -> Result<()> {
    let sim = ctx.config.simulation()?;
    let ds = simulate_cox_sample(&sim)?;
    let path = ctx.out.join("dataset.csv");
    write_dataset(&path, &ds, &ctx.envelope)?;
    print_json(&summarize_dataset(&ds));
    Ok(())
}

#[derive(Serialize)]
struct FitReport<'a> {
    data: String,
    penalty: PenaltyKind,
    lambda: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda_audit: Option<&'a LambdaAudit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beta_tilde: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    objective_reparametrized: Option<f64>,
    result: FitResult,
}

fn fit_command(ctx: &Context, data: &Path) -> Result<()> {
    let cfg = &ctx.config;
    let dict = cfg.dictionary()?;
    let penalty = cfg.penalty()?;
    let [lo, hi] = dict.domain();
    let loaded = read_dataset(data, CovariateBounds::new(lo, hi)?)?;
    let ds = loaded.dataset;
    let design = cfg.design(&ds)?;
    let choice = penalty.lambdas(&design, &ds)?;
    let (p, d) = (design.p(), design.d());

    let mut reports = Vec::new();
    match penalty.kind {
        PenaltyKind::Gpf => {
            let mut spec = penalty.spec(p, d)?;
            if let Some(per_group) = choice.audit.as_ref().and_then(|a| a.per_group.clone()) {
                spec = PenaltySpec::new(spec.rho, spec.gammas().to_vec(), spec.groups().clone(), 0.0, Some(per_group))?;
            }
            let results = if choice.values.len() == 1 {
                vec![fit(&design, &ds, &spec.with_lambda(choice.values[0])?, &cfg.fit)?]
            } else {
                fit_path(&design, &ds, &spec, &choice.values, &cfg.fit)?
            };
            for (&lambda, result) in choice.values.iter().zip(results) {
                reports.push((lambda, None, None, result));
            }
        }
        PenaltyKind::Smooth => {
            let factors = smoothing_factors(dict, penalty.eps_r, p)?;
            let spec = SmoothPenaltySpec::new(penalty.rho, penalty.gamma.clone(), 0.0, factors)?;
            for &lambda in &choice.values {
                let s = fit_smooth(&design, &ds, &spec.with_lambda(lambda)?, &cfg.fit)?;
                reports.push((lambda, Some(s.beta_tilde), Some(s.objective_reparametrized), s.result));
            }
        }
    }

    let single = reports.len() == 1;
    let mut non_converged = 0;
    for (k, (lambda, beta_tilde, objective_reparametrized, result)) in reports.into_iter().enumerate() {
        if !result.converged {
            non_converged += 1;
        }
        let name = if single { "fit.json".to_string() } else { format!("fit_{k:03}.json") };
        let report = FitReport {
            data: data.display().to_string(),
            penalty: penalty.kind,
            lambda,
            lambda_audit: choice.audit.as_ref(),
            beta_tilde,
            objective_reparametrized,
            result,
        };
        write_json(&ctx.out.join(&name), &ctx.envelope, &report)?;
        println!(
            "{name}: lambda {lambda:.6e}, objective {:.10}, iterations {}, converged {}",
            report.result.objective, report.result.iterations, report.result.converged
        );
    }
    if non_converged > 0 {
        return Err(CliError::NonConvergence(non_converged));
    }
    Ok(())
}

fn verify(ctx: &Context, suite: &str) -> Result<()> {
    let names: Vec<&str> = if suite == "all" {
        SUITES.iter().copied().filter(|s| *s != "all").collect()
    } else {
        vec![suite]
    };
    let mut failures = Vec::new();
    for name in names {
        let outcome: SuiteOutcome = run_suite(name, &ctx.config.verification, &ctx.config.fit, ctx.config.seed)?;
        write_json(&ctx.out.join(format!("verify_{name}.json")), &ctx.envelope, &outcome)?;
        if let Some(csv) = &outcome.csv {
            write_csv(&ctx.out.join(format!("{name}.csv")), &ctx.envelope, csv)?;
        }
        println!("{name}: {}", if outcome.passed { "PASS" } else { "FAIL" });
        for f in &outcome.failures {
            println!("  {f}");
            failures.push(format!("{name}: {f}"));
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Invariant(failures))
    }
}
