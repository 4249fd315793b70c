use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::penalty::Exponent;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Theorem1,
    Theorem2,
    Corollary1,
    Corollary2,
    Grid,
}

impl RuleKind {
    pub fn name(self) -> &'static str {
        match self {
            RuleKind::Theorem1 => "theorem1",
            RuleKind::Theorem2 => "theorem2",
            RuleKind::Corollary1 => "corollary1",
            RuleKind::Corollary2 => "corollary2",
            RuleKind::Grid => "grid",
        }
    }
}

/// Geometric grid from `max` down to `max * min_ratio`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Largest value; callers usually pass the zero-solution threshold.
    #[serde(default)]
    pub max: Option<f64>,
    #[serde(default = "default_min_ratio")]
    pub min_ratio: f64,
    #[serde(default = "default_count")]
    pub count: usize,
}

fn default_min_ratio() -> f64 {
    1e-2
}

fn default_count() -> usize {
    20
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            max: None,
            min_ratio: default_min_ratio(),
            count: default_count(),
        }
    }
}

/// Inputs of a tuning-parameter rule. Unused fields are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaRule {
    pub rule: RuleKind,
    #[serde(default)]
    pub a: Option<f64>,
    /// `exp ||beta*||_1`.
    #[serde(default)]
    pub u: Option<f64>,
    /// `u` was computed from a preliminary fit.
    #[serde(default)]
    pub u_plug_in: bool,
    #[serde(default)]
    pub lambda0: Option<f64>,
    #[serde(default)]
    pub d: Option<usize>,
    /// `rho'(0+)`; taken as 1 when absent.
    #[serde(default)]
    pub rho_prime: Option<f64>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub p: Option<usize>,
    #[serde(default)]
    pub zeta: Option<f64>,
    /// Per-group exponents (one value is broadcast).
    #[serde(default)]
    pub gammas: Vec<Exponent>,
    /// Group sizes for the per-group rule (default `d` each).
    #[serde(default)]
    pub group_sizes: Vec<usize>,
    /// Groups of the true support for the second theorem2 condition
    /// (all groups when absent).
    #[serde(default)]
    pub support: Option<Vec<usize>>,
    /// Constant of the second theorem2 condition; taken as 1 when absent.
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
}

impl LambdaRule {
    pub fn new(rule: RuleKind) -> Self {
        Self {
            rule,
            a: None,
            u: None,
            u_plug_in: false,
            lambda0: None,
            d: None,
            rho_prime: None,
            n: None,
            p: None,
            zeta: None,
            gammas: Vec::new(),
            group_sizes: Vec::new(),
            support: None,
            c: None,
            grid: None,
        }
    }
}

/// Result of a rule with every intermediate factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaAudit {
    pub rule: RuleKind,
    /// Global value (the largest entry for per-group rules, the first for grids).
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_group: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    pub factors: BTreeMap<String, f64>,
    pub flags: Vec<String>,
}

/// `exp ||b||_1` from a preliminary estimate.
pub fn plug_in_u(beta_init: &[f64]) -> f64 {
    libm::exp(beta_init.iter().map(|v| v.abs()).sum::<f64>())
}

fn need<T: Copy>(v: Option<T>, name: &'static str) -> Result<T> {
    v.ok_or(Error::MissingConstant(name))
}

fn nonneg(v: f64, name: &'static str) -> Result<f64> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(invalid(name, format!("must be finite and non-negative, got {v}")))
    }
}

fn positive(v: f64, name: &'static str) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(name, format!("must be finite and positive, got {v}")))
    }
}

struct Common {
    a: f64,
    n: f64,
    d: f64,
    log_ratio: f64,
}

fn common(rule: &LambdaRule, factors: &mut BTreeMap<String, f64>) -> Result<Common> {
    let a = nonneg(need(rule.a, "A")?, "A")?;
    let n = need(rule.n, "n")?;
    let p = need(rule.p, "p")?;
    let d = need(rule.d, "d")?;
    if n < 1 || p < 1 || d < 1 {
        return Err(invalid("n, p, d", "must be positive"));
    }
    let (n, pd, d) = (n as f64, (p * d) as f64, d as f64);
    let log_ratio = libm::sqrt(libm::log(pd).max(0.0) / n);
    factors.insert("A".to_string(), a);
    factors.insert("n".to_string(), n);
    factors.insert("pd".to_string(), pd);
    factors.insert("d".to_string(), d);
    factors.insert("sqrt_log_pd_over_n".to_string(), log_ratio);
    Ok(Common {
        a,
        n,
        d,
        log_ratio,
    })
}

fn rho_prime(rule: &LambdaRule, factors: &mut BTreeMap<String, f64>, flags: &mut Vec<String>) -> Result<f64> {
    let rp = match rule.rho_prime {
        Some(v) => positive(v, "rho_prime")?,
        None => {
            flags.push("rho_prime defaulted to 1".to_string());
            1.0
        }
    };
    factors.insert("rho_prime".to_string(), rp);
    Ok(rp)
}

fn u_value(rule: &LambdaRule, factors: &mut BTreeMap<String, f64>, flags: &mut Vec<String>) -> Result<f64> {
    let u = positive(need(rule.u, "u")?, "u")?;
    if rule.u_plug_in {
        flags.push("u is a plug-in exp(||beta_init||_1)".to_string());
    }
    factors.insert("u".to_string(), u);
    Ok(u)
}

fn gamma_at(rule: &LambdaRule, j: usize) -> Result<Exponent> {
    match rule.gammas.len() {
        0 => Err(Error::MissingConstant("gammas")),
        1 => Ok(rule.gammas[0]),
        _ => rule
            .gammas
            .get(j)
            .copied()
            .ok_or_else(|| invalid("gammas", format!("no exponent for group {j}"))),
    }
}

/// Evaluates a tuning-parameter rule.
pub fn lambda_from_theory(rule: &LambdaRule) -> Result<LambdaAudit> {
    let mut factors = BTreeMap::new();
    let mut flags = Vec::new();
    let mut per_group = None;
    let mut grid = None;
    let lambda = match rule.rule {
        RuleKind::Theorem1 => {
            let c = common(rule, &mut factors)?;
            let u = u_value(rule, &mut factors, &mut flags)?;
            let l0 = nonneg(need(rule.lambda0, "lambda0")?, "lambda0")?;
            let rp = rho_prime(rule, &mut factors, &mut flags)?;
            factors.insert("lambda0".to_string(), l0);
            let n14 = libm::pow(c.n, 0.25);
            factors.insert("n_quarter".to_string(), n14);
            8.0 * c.a * u * n14 * l0 / (c.d * rp) * c.log_ratio
        }
        RuleKind::Theorem2 => {
            let c = common(rule, &mut factors)?;
            let u = u_value(rule, &mut factors, &mut flags)?;
            let rp = rho_prime(rule, &mut factors, &mut flags)?;
            let zeta = nonneg(need(rule.zeta, "zeta")?, "zeta")?;
            let cc = match rule.c {
                Some(v) => nonneg(v, "c")?,
                None => {
                    flags.push("constant c unspecified, using 1".to_string());
                    1.0
                }
            };
            let groups: Vec<usize> = match &rule.support {
                Some(s) => s.clone(),
                None => {
                    let p = need(rule.p, "p")?;
                    flags.push("support unknown, summing over all groups".to_string());
                    (0..p).collect()
                }
            };
            let mut sum = 0.0;
            for &j in &groups {
                let g = gamma_at(rule, j)?;
                sum += libm::pow(c.d, 1.0 + 2.0 * g.conjugate().reciprocal());
            }
            let n14 = libm::pow(c.n, 0.25);
            let first = 8.0 * c.a * u * n14 / (c.d * rp) * c.log_ratio;
            let second = if sum > 0.0 {
                cc * libm::pow(zeta, 4.0) / sum
            } else {
                0.0
            };
            factors.insert("n_quarter".to_string(), n14);
            factors.insert("zeta".to_string(), zeta);
            factors.insert("c".to_string(), cc);
            factors.insert("support_sum".to_string(), sum);
            factors.insert("first_condition".to_string(), first);
            factors.insert("second_condition".to_string(), second);
            let lambda = first.max(second);
            factors.insert(
                "second_condition_margin".to_string(),
                lambda * sum - cc * libm::pow(zeta, 4.0),
            );
            if second > first {
                flags.push("second condition is binding".to_string());
            }
            lambda
        }
        RuleKind::Corollary1 => {
            let c = common(rule, &mut factors)?;
            let zeta = nonneg(need(rule.zeta, "zeta")?, "zeta")?;
            factors.insert("zeta".to_string(), zeta);
            let p = need(rule.p, "p")?;
            let sizes: Vec<usize> = match rule.group_sizes.len() {
                0 => alloc::vec![c.d as usize; p],
                1 => alloc::vec![rule.group_sizes[0]; p],
                k if k == p => rule.group_sizes.clone(),
                k => {
                    return Err(Error::DimensionMismatch {
                        expected: p,
                        got: k,
                    })
                }
            };
            let mut values = Vec::with_capacity(p);
            for (j, &size) in sizes.iter().enumerate() {
                let g = gamma_at(rule, j)?;
                let shrink = libm::pow(size as f64, -2.0 * g.conjugate().reciprocal());
                let v = c.a * (zeta * zeta).min(c.log_ratio * shrink) / libm::sqrt(c.d);
                values.push(v);
            }
            let max = values.iter().copied().fold(0.0, f64::max);
            per_group = Some(values);
            max
        }
        RuleKind::Corollary2 => {
            let c = common(rule, &mut factors)?;
            let zeta = nonneg(need(rule.zeta, "zeta")?, "zeta")?;
            factors.insert("zeta".to_string(), zeta);
            c.a * (zeta * zeta).min(c.log_ratio) / (c.d * c.d)
        }
        RuleKind::Grid => {
            let spec = rule.grid.clone().unwrap_or_default();
            let max = nonneg(need(spec.max, "grid.max")?, "grid.max")?;
            if !(spec.min_ratio > 0.0 && spec.min_ratio <= 1.0) {
                return Err(invalid("grid.min_ratio", "must lie in (0, 1]"));
            }
            if spec.count == 0 {
                return Err(invalid("grid.count", "must be positive"));
            }
            factors.insert("max".to_string(), max);
            factors.insert("min_ratio".to_string(), spec.min_ratio);
            let values: Vec<f64> = if spec.count == 1 {
                alloc::vec![max]
            } else {
                let step = libm::log(spec.min_ratio) / (spec.count - 1) as f64;
                (0..spec.count)
                    .map(|k| max * libm::exp(step * k as f64))
                    .collect()
            };
            grid = Some(values);
            max
        }
    };
    Ok(LambdaAudit {
        rule: rule.rule,
        lambda,
        per_group,
        grid,
        factors,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t1(n: usize, p: usize) -> LambdaRule {
        LambdaRule {
            a: Some(1.0),
            u: Some(1.0),
            lambda0: Some(1.0),
            d: Some(1),
            rho_prime: Some(1.0),
            n: Some(n),
            p: Some(p),
            ..LambdaRule::new(RuleKind::Theorem1)
        }
    }

    #[test]
    fn theorem1_hand_value() {
        // pd = e is not an integer; evaluate the formula at log(pd) = 1 directly.
        let n = 16.0_f64;
        let expected = 8.0 * libm::pow(n, 0.25) * libm::sqrt(1.0 / n);
        assert!((expected - 4.0).abs() < 1e-12);
        let audit = lambda_from_theory(&t1(16, 3)).unwrap();
        let scale = libm::sqrt(libm::log(3.0));
        assert!((audit.lambda - 4.0 * scale).abs() < 1e-12);
    }

    #[test]
    fn zero_a_gives_zero() {
        let mut r = t1(16, 3);
        r.a = Some(0.0);
        assert_eq!(lambda_from_theory(&r).unwrap().lambda, 0.0);
    }

    #[test]
    fn doubling_pd_ratio() {
        let l1 = lambda_from_theory(&t1(100, 5)).unwrap().lambda;
        let l2 = lambda_from_theory(&t1(100, 10)).unwrap().lambda;
        let ratio = libm::sqrt(libm::log(10.0) / libm::log(5.0));
        assert!((l2 / l1 - ratio).abs() < 1e-12);
    }

    #[test]
    fn missing_constant() {
        let mut r = t1(16, 3);
        r.u = None;
        assert_eq!(lambda_from_theory(&r), Err(Error::MissingConstant("u")));
        let mut r = LambdaRule::new(RuleKind::Corollary2);
        r.a = Some(1.0);
        r.n = Some(10);
        r.p = Some(2);
        r.d = Some(2);
        assert_eq!(lambda_from_theory(&r), Err(Error::MissingConstant("zeta")));
    }

    #[test]
    fn theorem2_meets_second_condition() {
        let r = LambdaRule {
            a: Some(0.01),
            u: Some(1.0),
            d: Some(4),
            n: Some(100),
            p: Some(3),
            zeta: Some(1.0),
            gammas: alloc::vec![Exponent::TWO],
            ..LambdaRule::new(RuleKind::Theorem2)
        };
        let a = lambda_from_theory(&r).unwrap();
        let sum = 3.0 * libm::pow(4.0, 2.0);
        assert!(a.lambda * sum >= 1.0 - 1e-12);
        assert!(a.flags.iter().any(|f| f.contains("constant c")));
        assert!(a.flags.iter().any(|f| f.contains("rho_prime")));
    }

    #[test]
    fn corollaries() {
        let r = LambdaRule {
            a: Some(2.0),
            d: Some(4),
            n: Some(100),
            p: Some(2),
            zeta: Some(10.0),
            gammas: alloc::vec![Exponent::TWO, Exponent::INF],
            ..LambdaRule::new(RuleKind::Corollary1)
        };
        let a = lambda_from_theory(&r).unwrap();
        let pg = a.per_group.unwrap();
        let s = libm::sqrt(libm::log(8.0) / 100.0);
        assert!((pg[0] - 2.0 * s / 4.0 / 2.0).abs() < 1e-12);
        assert!((pg[1] - 2.0 * s / 16.0 / 2.0).abs() < 1e-12);

        let r2 = LambdaRule {
            rule: RuleKind::Corollary2,
            ..r
        };
        let a2 = lambda_from_theory(&r2).unwrap();
        assert!((a2.lambda - 2.0 * s / 16.0).abs() < 1e-12);
    }

    #[test]
    fn grid_is_descending_geometric() {
        let mut r = LambdaRule::new(RuleKind::Grid);
        r.grid = Some(GridSpec {
            max: Some(1.0),
            min_ratio: 0.01,
            count: 3,
        });
        let g = lambda_from_theory(&r).unwrap().grid.unwrap();
        assert!((g[0] - 1.0).abs() < 1e-15 && (g[1] - 0.1).abs() < 1e-12 && (g[2] - 0.01).abs() < 1e-12);
    }

    #[test]
    fn plug_in() {
        assert!((plug_in_u(&[1.0, -1.0]) - libm::exp(2.0)).abs() < 1e-12);
    }
}
