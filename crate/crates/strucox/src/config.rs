//! Run configuration.
//!
//! One JSON document drives every command. Blocks a command does not use
//! are allowed and ignored; unknown keys anywhere are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use strucox_core::basis::{expand_design, DesignExpansion, DictionarySpec};
use strucox_core::penalty::{Exponent, GroupStructure, PenaltySpec, Rho};
use strucox_core::solver::{lambda_from_theory, zero_threshold, FitConfig, LambdaAudit, LambdaRule, RuleKind};
use strucox_core::survival::{SimulationConfig, SurvivalDataset};

use crate::error::{CliError, Result};
use crate::suites::VerificationConfig;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// The top-level seed replaces `simulation.seed`.
    #[serde(default)]
    pub simulation: Option<SimulationConfig>,
    #[serde(default)]
    pub dictionary: Option<DictionarySpec>,
    /// Center and scale design columns before fitting.
    #[serde(default)]
    pub standardize: bool,
    #[serde(default)]
    pub penalty: Option<PenaltyBlock>,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub verification: VerificationConfig,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    #[default]
    Gpf,
    /// Smooth selection with second-derivative Gram matrices.
    Smooth,
}

/// Penalty family and the source of its tuning parameter: exactly one of
/// `lambda`, `lambda_grid` and `rule`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltyBlock {
    #[serde(default)]
    pub kind: PenaltyKind,
    #[serde(default)]
    pub rho: Rho,
    #[serde(default = "default_gamma")]
    pub gamma: Vec<Exponent>,
    /// Coefficient index sets; `p` contiguous blocks of size `d` when absent.
    #[serde(default)]
    pub groups: Option<Vec<Vec<usize>>>,
    #[serde(default)]
    pub per_group_lambda: Option<Vec<f64>>,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub lambda_grid: Option<Vec<f64>>,
    /// `n`, `p` and `d` are filled from the data when absent; a grid rule
    /// without `grid.max` starts at the zero-solution threshold.
    #[serde(default)]
    pub rule: Option<LambdaRule>,
    #[serde(default = "default_eps_r")]
    pub eps_r: f64,
}

fn default_gamma() -> Vec<Exponent> {
    vec![Exponent::TWO]
}

fn default_eps_r() -> f64 {
    1e-8
}

/// Where the tuning parameters came from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LambdaChoice {
    pub values: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audit: Option<LambdaAudit>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Input {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// SHA-256 of the canonical JSON form (object keys sorted, defaults
    /// filled in).
    pub fn config_hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let bytes = serde_json::to_vec(&value).expect("value serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn simulation(&self) -> Result<SimulationConfig> {
        let mut sim = self
            .simulation
            .clone()
            .ok_or_else(|| CliError::config("missing `simulation` block"))?;
        sim.seed = self.seed;
        sim.validate()?;
        Ok(sim)
    }

    pub fn dictionary(&self) -> Result<&DictionarySpec> {
        self.dictionary
            .as_ref()
            .ok_or_else(|| CliError::config("missing `dictionary` block"))
    }

    pub fn penalty(&self) -> Result<&PenaltyBlock> {
        self.penalty
            .as_ref()
            .ok_or_else(|| CliError::config("missing `penalty` block"))
    }

    pub fn design(&self, ds: &SurvivalDataset) -> Result<DesignExpansion> {
        let raw = expand_design(ds, self.dictionary()?)?;
        Ok(if self.standardize { raw.standardized() } else { raw })
    }
}

impl PenaltyBlock {
    pub fn groups(&self, p: usize, d: usize) -> Result<GroupStructure> {
        match &self.groups {
            Some(g) => Ok(GroupStructure::new(g.clone(), p * d)?),
            None => Ok(GroupStructure::contiguous(p, d)),
        }
    }

    /// Penalty with `lambda = 0`; the caller sets the value.
    pub fn spec(&self, p: usize, d: usize) -> Result<PenaltySpec> {
        Ok(PenaltySpec::new(
            self.rho,
            self.gamma.clone(),
            self.groups(p, d)?,
            0.0,
            self.per_group_lambda.clone(),
        )?)
    }

    /// Tuning parameters in descending order.
    pub fn lambdas(&self, design: &DesignExpansion, ds: &SurvivalDataset) -> Result<LambdaChoice> {
        let sources = [self.lambda.is_some(), self.lambda_grid.is_some(), self.rule.is_some()];
        if sources.iter().filter(|&&s| s).count() != 1 {
            return Err(CliError::config(
                "penalty: give exactly one of `lambda`, `lambda_grid`, `rule`",
            ));
        }
        if let Some(l) = self.lambda {
            return Ok(LambdaChoice {
                values: vec![l],
                audit: None,
            });
        }
        if let Some(grid) = &self.lambda_grid {
            if grid.is_empty() {
                return Err(CliError::config("penalty.lambda_grid: empty"));
            }
            let mut values = grid.clone();
            values.sort_by(|a, b| b.total_cmp(a));
            return Ok(LambdaChoice { values, audit: None });
        }
        let mut rule = self.rule.clone().expect("checked above");
        rule.n.get_or_insert(design.n());
        rule.p.get_or_insert(design.p());
        rule.d.get_or_insert(design.d());
        if rule.gammas.is_empty() {
            rule.gammas = self.gamma.clone();
        }
        if rule.rho_prime.is_none() {
            rule.rho_prime = Some(self.rho.right_derivative_at_zero());
        }
        if rule.rule == RuleKind::Grid {
            let grid = rule.grid.get_or_insert_with(Default::default);
            if grid.max.is_none() {
                let spec = self.spec(design.p(), design.d())?;
                grid.max = Some(zero_threshold(design, ds, &spec)?);
            }
        }
        let audit = lambda_from_theory(&rule)?;
        let values = audit.grid.clone().unwrap_or_else(|| vec![audit.lambda]);
        Ok(LambdaChoice {
            values,
            audit: Some(audit),
        })
    }
}
