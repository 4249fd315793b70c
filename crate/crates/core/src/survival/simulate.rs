use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::{CovariateBounds, SurvivalDataset, SurvivalRecord};
use crate::basis::DictionarySpec;
use crate::error::{invalid, Error, Result};
use crate::rng::{stream_rng, streams};

/// Shared closure used by the custom variants. Not serializable.
pub struct CustomFn<F: ?Sized>(pub Arc<F>);

impl<F: ?Sized> Clone for CustomFn<F> {
    fn clone(&self) -> Self {
        Self(Arc::clone(&self.0))
    }
}

impl<F: ?Sized> fmt::Debug for CustomFn<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("<custom>")
    }
}

type ScalarFn = dyn Fn(f64) -> f64 + Send + Sync;
type VectorFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Baseline hazard `lambda_0` with cumulative `Lambda_0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaselineHazard {
    Constant {
        rate: f64,
    },
    /// `lambda_0(t) = (shape/scale) (t/scale)^(shape-1)`.
    Weibull {
        shape: f64,
        scale: f64,
    },
    /// `lambda_0(t) = intercept + slope t`, inverted numerically.
    Linear {
        intercept: f64,
        slope: f64,
    },
    /// Arbitrary hazard with its cumulative, inverted numerically.
    #[serde(skip)]
    Custom {
        hazard: CustomFn<ScalarFn>,
        cumulative: CustomFn<ScalarFn>,
    },
}

impl BaselineHazard {
    pub fn custom(
        hazard: impl Fn(f64) -> f64 + Send + Sync + 'static,
        cumulative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::Custom {
            hazard: CustomFn(Arc::new(hazard)),
            cumulative: CustomFn(Arc::new(cumulative)),
        }
    }

    pub fn hazard(&self, t: f64) -> f64 {
        match self {
            Self::Constant { rate } => *rate,
            Self::Weibull { shape, scale } => {
                shape / scale * libm::pow(t / scale, shape - 1.0)
            }
            Self::Linear { intercept, slope } => intercept + slope * t,
            Self::Custom { hazard, .. } => (hazard.0)(t),
        }
    }

    pub fn cumulative(&self, t: f64) -> f64 {
        match self {
            Self::Constant { rate } => rate * t,
            Self::Weibull { shape, scale } => libm::pow(t / scale, *shape),
            Self::Linear { intercept, slope } => intercept * t + 0.5 * slope * t * t,
            Self::Custom { cumulative, .. } => (cumulative.0)(t),
        }
    }

    /// Checks the parameters and, for the numeric variants, that the
    /// cumulative hazard is finite and nondecreasing up to `horizon`.
    pub fn validate(&self, horizon: Option<f64>) -> Result<()> {
        match *self {
            Self::Constant { rate } if !(rate > 0.0 && rate.is_finite()) => {
                Err(Error::NonInvertibleHazard(format!("constant rate {rate}")))
            }
            Self::Weibull { shape, scale }
                if !(shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite()) =>
            {
                Err(Error::NonInvertibleHazard(format!(
                    "weibull shape {shape}, scale {scale}"
                )))
            }
            Self::Linear { intercept, slope } => {
                let end = match horizon {
                    Some(h) => intercept + slope * h,
                    None if slope < 0.0 => -1.0,
                    None => intercept.max(slope),
                };
                if !(intercept >= 0.0 && end >= 0.0 && (intercept > 0.0 || slope > 0.0)) {
                    return Err(Error::NonInvertibleHazard(format!(
                        "linear hazard {intercept} + {slope} t goes negative or vanishes"
                    )));
                }
                Ok(())
            }
            Self::Custom { .. } => {
                let h = horizon.unwrap_or(1.0);
                let mut prev = self.cumulative(0.0);
                if prev.abs() > 1e-12 {
                    return Err(Error::NonInvertibleHazard("cumulative(0) != 0".into()));
                }
                for k in 1..=1000 {
                    let v = self.cumulative(h * k as f64 / 1000.0);
                    if !v.is_finite() || v < prev {
                        return Err(Error::NonInvertibleHazard(format!(
                            "cumulative not finite and nondecreasing at t = {}",
                            h * k as f64 / 1000.0
                        )));
                    }
                    prev = v;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Smallest `t` with `Lambda_0(t) = y`, or `None` when `t` would exceed
    /// `horizon`.
    pub fn inverse_cumulative(&self, y: f64, horizon: Option<f64>) -> Result<Option<f64>> {
        let t = match *self {
            Self::Constant { rate } => y / rate,
            Self::Weibull { shape, scale } => scale * libm::pow(y, 1.0 / shape),
            _ => return self.bisect(y, horizon),
        };
        Ok(match horizon {
            Some(h) if t > h => None,
            _ => Some(t),
        })
    }

    fn bisect(&self, y: f64, horizon: Option<f64>) -> Result<Option<f64>> {
        if y <= 0.0 {
            return Ok(Some(0.0));
        }
        let mut hi = match horizon {
            Some(h) => {
                if self.cumulative(h) < y {
                    return Ok(None);
                }
                h
            }
            None => {
                let mut hi = 1.0;
                let mut doublings = 0;
                while self.cumulative(hi) < y {
                    hi *= 2.0;
                    doublings += 1;
                    if doublings > 1100 || !hi.is_finite() {
                        return Err(Error::NonInvertibleHazard(format!(
                            "cumulative hazard never reaches {y}"
                        )));
                    }
                }
                hi
            }
        };
        let mut lo = 0.0;
        while hi - lo > 1e-10 * hi {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cumulative(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(Some(hi))
    }
}

/// Law of the random censoring time `D`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CensoringLaw {
    #[default]
    None,
    Exponential {
        rate: f64,
    },
    Uniform {
        lower: f64,
        upper: f64,
    },
}

impl CensoringLaw {
    fn validate(&self) -> Result<()> {
        match *self {
            Self::Exponential { rate } if !(rate > 0.0 && rate.is_finite()) => {
                Err(invalid("censoring.rate", format!("{rate} must be positive")))
            }
            Self::Uniform { lower, upper } if !(lower >= 0.0 && upper > lower) => Err(invalid(
                "censoring",
                format!("uniform [{lower}, {upper}] must satisfy 0 <= lower < upper"),
            )),
            _ => Ok(()),
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::None => f64::INFINITY,
            Self::Exponential { rate } => rng.sample::<f64, _>(Exp1) / rate,
            Self::Uniform { lower, upper } => lower + (upper - lower) * rng.random::<f64>(),
        }
    }
}

/// Law of the covariate vector on `[a, b]^p`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CovariateLaw {
    /// Independent uniforms on the covariate bounds.
    #[default]
    Uniform,
    /// Every subject gets the same vector.
    Constant { values: Vec<f64> },
}

/// True log relative risk `g`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RiskFunction {
    #[default]
    Zero,
    Linear {
        weights: Vec<f64>,
    },
    /// `g(x) = sum_j sum_k b_jk Psi_k(x_j)`.
    Additive {
        dictionary: DictionarySpec,
        coefficients: Vec<f64>,
    },
    #[serde(skip)]
    Custom(CustomFn<VectorFn>),
}

impl RiskFunction {
    pub fn custom(g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self::Custom(CustomFn(Arc::new(g)))
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        Ok(match self {
            Self::Zero => 0.0,
            Self::Linear { weights } => crate::linalg::dot(weights, x),
            Self::Additive {
                dictionary,
                coefficients,
            } => {
                let d = dictionary.d();
                let mut psi = vec![0.0; d];
                let mut g = 0.0;
                for (j, &xj) in x.iter().enumerate() {
                    dictionary.evaluate_into(xj, &mut psi)?;
                    g += crate::linalg::dot(&coefficients[j * d..(j + 1) * d], &psi);
                }
                g
            }
            Self::Custom(f) => (f.0)(x),
        })
    }

    fn validate(&self, p: usize) -> Result<()> {
        match self {
            Self::Linear { weights } if weights.len() != p => Err(invalid(
                "true_model.risk.weights",
                format!("length {} but p = {p}", weights.len()),
            )),
            Self::Additive {
                dictionary,
                coefficients,
            } if coefficients.len() != p * dictionary.d() => Err(invalid(
                "true_model.risk.coefficients",
                format!("length {} but p*d = {}", coefficients.len(), p * dictionary.d()),
            )),
            _ => Ok(()),
        }
    }
}

/// Baseline hazard, relative risk and censoring law.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrueModel {
    pub baseline: BaselineHazard,
    #[serde(default)]
    pub risk: RiskFunction,
    #[serde(default)]
    pub censoring: CensoringLaw,
}

/// Everything needed to draw one sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub n: usize,
    pub p: usize,
    #[serde(default)]
    pub bounds: CovariateBounds,
    #[serde(default)]
    pub covariate_law: CovariateLaw,
    pub true_model: TrueModel,
    /// Administrative censoring time `tau`; `None` means no truncation.
    #[serde(default)]
    pub study_end: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(invalid("n", format!("{} must be at least 2", self.n)));
        }
        if self.p == 0 {
            return Err(invalid("p", "must be positive"));
        }
        if let Some(t) = self.study_end {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidStudyEnd(t));
            }
        }
        if let CovariateLaw::Constant { values } = &self.covariate_law {
            if values.len() != self.p {
                return Err(invalid(
                    "covariate_law.values",
                    format!("length {} but p = {}", values.len(), self.p),
                ));
            }
            if let Some(v) = values.iter().find(|v| !self.bounds.contains(**v)) {
                return Err(invalid("covariate_law.values", format!("{v} outside bounds")));
            }
        }
        self.true_model.baseline.validate(self.study_end)?;
        self.true_model.censoring.validate()?;
        self.true_model.risk.validate(self.p)
    }
}

/// A simulated dataset together with the latent quantities.
#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub dataset: SurvivalDataset,
    /// Latent event times; infinite when beyond the study end.
    pub event_times: Vec<f64>,
    /// `g(X_i)` for each subject.
    pub risk_scores: Vec<f64>,
}

/// Draws a sample by inverting the cumulative hazard. Deterministic in the seed.
pub fn simulate_cox_sample(config: &SimulationConfig) -> Result<SurvivalDataset> {
    simulate_with_truth(config).map(|o| o.dataset)
}

pub fn simulate_with_truth(config: &SimulationConfig) -> Result<SimulationOutput> {
    config.validate()?;
    let SimulationConfig {
        n,
        p,
        bounds,
        study_end,
        seed,
        ..
    } = *config;
    let model = &config.true_model;

    let mut cov_rng = stream_rng(seed, streams::COVARIATES);
    let mut time_rng = stream_rng(seed, streams::EVENT_TIMES);
    let mut cens_rng = stream_rng(seed, streams::CENSORING);

    let width = bounds.upper - bounds.lower;
    let mut records = Vec::with_capacity(n);
    let mut event_times = Vec::with_capacity(n);
    let mut risk_scores = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = match &config.covariate_law {
            CovariateLaw::Uniform => (0..p)
                .map(|_| (bounds.lower + width * cov_rng.random::<f64>()).min(bounds.upper))
                .collect(),
            CovariateLaw::Constant { values } => values.clone(),
        };
        let g = model.risk.evaluate(&x)?;
        let e: f64 = time_rng.sample(Exp1);
        let t = model
            .baseline
            .inverse_cumulative(e * libm::exp(-g), study_end)?
            .unwrap_or(f64::INFINITY);
        let d = model.censoring.draw(&mut cens_rng);
        let (mut z, mut event) = if t <= d { (t, true) } else { (d, false) };
        if let Some(tau) = study_end {
            if z > tau {
                z = tau;
                event = false;
            }
        }
        if !z.is_finite() {
            return Err(Error::NonInvertibleHazard(
                "infinite event time without study end".into(),
            ));
        }
        records.push(SurvivalRecord::new(z, event, x));
        event_times.push(t);
        risk_scores.push(g);
    }
    let dataset = SurvivalDataset::new(records, bounds, study_end)?;
    Ok(SimulationOutput {
        dataset,
        event_times,
        risk_scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(n: usize, seed: u64) -> SimulationConfig {
        SimulationConfig {
            n,
            p: 1,
            bounds: CovariateBounds::default(),
            covariate_law: CovariateLaw::Uniform,
            true_model: TrueModel {
                baseline: BaselineHazard::Constant { rate: 1.0 },
                risk: RiskFunction::Zero,
                censoring: CensoringLaw::None,
            },
            study_end: None,
            seed,
        }
    }

    #[test]
    fn exponential_mean() {
        let out = simulate_with_truth(&config(100_000, 11)).unwrap();
        let mean = out.event_times.iter().sum::<f64>() / 1e5;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn ks_distance_against_exponential() {
        let rate = 2.5;
        let mut c = config(100_000, 5);
        c.true_model.baseline = BaselineHazard::Constant { rate };
        let mut t = simulate_with_truth(&c).unwrap().event_times;
        t.sort_by(f64::total_cmp);
        let n = t.len() as f64;
        let ks = t.iter().enumerate().fold(0.0f64, |m, (k, &x)| {
            let f = 1.0 - libm::exp(-rate * x);
            m.max((f - k as f64 / n).abs()).max((f - (k + 1) as f64 / n).abs())
        });
        assert!(ks < 0.01, "{ks}");
    }

    #[test]
    fn seed_determinism() {
        let a = simulate_cox_sample(&config(500, 3)).unwrap();
        let b = simulate_cox_sample(&config(500, 3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_covariate_matches_null_model() {
        let mut c0 = config(300, 9);
        c0.covariate_law = CovariateLaw::Constant { values: vec![0.0] };
        let mut c1 = c0.clone();
        c1.true_model.risk = RiskFunction::Linear { weights: vec![1.0] };
        assert_eq!(simulate_cox_sample(&c0).unwrap(), simulate_cox_sample(&c1).unwrap());
    }

    #[test]
    fn numeric_inversion_matches_closed_form() {
        let lin = BaselineHazard::Linear {
            intercept: 0.5,
            slope: 2.0,
        };
        for y in [0.01, 0.3, 2.0, 17.0] {
            let t = lin.inverse_cumulative(y, None).unwrap().unwrap();
            let exact = (-0.5 + libm::sqrt(0.25 + 4.0 * y)) / 2.0;
            assert!((t - exact).abs() <= 2e-10 * exact, "{t} vs {exact}");
        }
        let custom = BaselineHazard::custom(|t| 3.0 * t * t, |t| t * t * t);
        let t = custom.inverse_cumulative(8.0, None).unwrap().unwrap();
        assert!((t - 2.0).abs() < 1e-9);
    }

    #[test]
    fn administrative_censoring() {
        let mut c = config(2000, 1);
        c.study_end = Some(0.5);
        c.true_model.censoring = CensoringLaw::Exponential { rate: 0.5 };
        let ds = simulate_cox_sample(&c).unwrap();
        assert!(ds.records().iter().all(|r| r.time <= 0.5));
        assert!(ds.records().iter().any(|r| r.time == 0.5 && !r.event));
    }

    #[test]
    fn rejects_non_invertible_baseline() {
        let mut c = config(10, 1);
        c.true_model.baseline = BaselineHazard::Constant { rate: 0.0 };
        assert!(matches!(simulate_cox_sample(&c), Err(Error::NonInvertibleHazard(_))));
        c.true_model.baseline = BaselineHazard::custom(|_| 0.0, |t| 1.0 - libm::exp(-t));
        assert!(matches!(simulate_cox_sample(&c), Err(Error::NonInvertibleHazard(_))));
    }
}
