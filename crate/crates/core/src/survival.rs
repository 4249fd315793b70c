//! Censored survival data, risk sets and simulation from the hazard model
//! `lambda_0(t) exp{g(x)}`.

mod simulate;

use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use simulate::{
    simulate_cox_sample, simulate_with_truth, BaselineHazard, CensoringLaw, CovariateLaw,
    CustomFn, RiskFunction, SimulationConfig, SimulationOutput, TrueModel,
};

/// One censored observation `(Z_i, delta_i, X_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    /// Observed time `min(T, D)`.
    pub time: f64,
    /// `true` when the event was observed.
    pub event: bool,
    pub covariates: Vec<f64>,
}

impl SurvivalRecord {
    pub fn new(time: f64, event: bool, covariates: Vec<f64>) -> Self {
        Self {
            time,
            event,
            covariates,
        }
    }
}

/// Common interval `[lower, upper]` holding every covariate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovariateBounds {
    pub lower: f64,
    pub upper: f64,
}

impl Default for CovariateBounds {
    fn default() -> Self {
        Self {
            lower: 0.0,
            upper: 1.0,
        }
    }
}

impl CovariateBounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(crate::error::invalid(
                "bounds",
                format!("[{lower}, {upper}] is not a proper interval"),
            ));
        }
        Ok(Self { lower, upper })
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }
}

/// Ordered failure times and the nested risk sets `R_q = {i : Z_i >= t_q}`.
///
/// Subjects are kept sorted by observed time so that every risk set is a
/// suffix of [`RiskSets::order`]. Tied event times share one `t_q`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskSets {
    failure_times: Vec<f64>,
    order: Vec<usize>,
    risk_start: Vec<usize>,
    event_start: Vec<usize>,
    events: Vec<usize>,
    last_at_risk: Vec<Option<usize>>,
    tie_flag: bool,
}

impl RiskSets {
    /// Number of distinct failure times `N`.
    pub fn len(&self) -> usize {
        self.failure_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.failure_times.is_empty()
    }

    pub fn failure_times(&self) -> &[f64] {
        &self.failure_times
    }

    /// Subjects sorted by observed time, ascending.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Position in [`RiskSets::order`] where `R_q` starts.
    pub fn risk_start(&self, q: usize) -> usize {
        self.risk_start[q]
    }

    /// Members of `R_q` (in time order, not index order).
    pub fn risk_set(&self, q: usize) -> &[usize] {
        &self.order[self.risk_start[q]..]
    }

    /// Subjects whose event defines `t_q`.
    pub fn events_at(&self, q: usize) -> &[usize] {
        &self.events[self.event_start[q]..self.event_start[q + 1]]
    }

    /// Last failure index at which subject `i` is at risk.
    pub fn last_at_risk(&self, i: usize) -> Option<usize> {
        self.last_at_risk[i]
    }

    pub fn is_at_risk(&self, i: usize, q: usize) -> bool {
        self.last_at_risk[i].is_some_and(|k| q <= k)
    }

    /// `true` when two events share a failure time.
    pub fn tie_flag(&self) -> bool {
        self.tie_flag
    }

    /// Total number of events counted across failure times.
    pub fn event_count(&self) -> usize {
        self.events.len()
    }
}

/// Builds failure times and risk sets. Events after `study_end` are ignored.
pub fn build_risk_sets(records: &[SurvivalRecord], study_end: f64) -> RiskSets {
    let n = records.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| records[a].time.total_cmp(&records[b].time).then(a.cmp(&b)));

    let mut failure_times: Vec<f64> = Vec::new();
    let mut event_start = Vec::new();
    let mut events = Vec::new();
    let mut tie_flag = false;
    for &i in &order {
        let r = &records[i];
        if !r.event || r.time > study_end {
            continue;
        }
        if failure_times.last() == Some(&r.time) {
            tie_flag = true;
        } else {
            failure_times.push(r.time);
            event_start.push(events.len());
        }
        events.push(i);
    }
    event_start.push(events.len());

    let risk_start = failure_times
        .iter()
        .map(|&t| order.partition_point(|&i| records[i].time < t))
        .collect();
    let last_at_risk = records
        .iter()
        .map(|r| failure_times.partition_point(|&t| t <= r.time).checked_sub(1))
        .collect();

    RiskSets {
        failure_times,
        order,
        risk_start,
        event_start,
        events,
        last_at_risk,
        tie_flag,
    }
}

/// Validated censored sample with its risk sets. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    records: Vec<SurvivalRecord>,
    study_end: f64,
    bounds: CovariateBounds,
    risk: RiskSets,
}

impl SurvivalDataset {
    /// Validates `records` and builds the risk sets.
    ///
    /// `study_end` defaults to the largest event time, or the largest
    /// observed time when there are no events.
    pub fn new(
        records: Vec<SurvivalRecord>,
        bounds: CovariateBounds,
        study_end: Option<f64>,
    ) -> Result<Self> {
        let first = records.first().ok_or(Error::NoRecords)?;
        let p = first.covariates.len();
        for (row, r) in records.iter().enumerate() {
            if !(r.time.is_finite() && r.time >= 0.0) {
                return Err(Error::InvalidRecord {
                    row,
                    reason: format!("time {} is not a nonnegative number", r.time),
                });
            }
            if r.covariates.len() != p {
                return Err(Error::InvalidRecord {
                    row,
                    reason: format!("{} covariates, expected {p}", r.covariates.len()),
                });
            }
            for (column, &value) in r.covariates.iter().enumerate() {
                if !bounds.contains(value) {
                    return Err(Error::CovariateOutOfBounds {
                        row,
                        column,
                        value,
                        lower: bounds.lower,
                        upper: bounds.upper,
                    });
                }
            }
        }
        let tau = match study_end {
            Some(t) => t,
            None => {
                let max_event = records
                    .iter()
                    .filter(|r| r.event)
                    .map(|r| r.time)
                    .fold(f64::NEG_INFINITY, f64::max);
                if max_event.is_finite() {
                    max_event
                } else {
                    records.iter().map(|r| r.time).fold(0.0, f64::max)
                }
            }
        };
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidStudyEnd(tau));
        }
        let risk = build_risk_sets(&records, tau);
        Ok(Self {
            records,
            study_end: tau,
            bounds,
            risk,
        })
    }

    pub fn records(&self) -> &[SurvivalRecord] {
        &self.records
    }

    pub fn n(&self) -> usize {
        self.records.len()
    }

    /// Number of covariates `p`.
    pub fn p(&self) -> usize {
        self.records[0].covariates.len()
    }

    pub fn study_end(&self) -> f64 {
        self.study_end
    }

    pub fn bounds(&self) -> CovariateBounds {
        self.bounds
    }

    pub fn risk_sets(&self) -> &RiskSets {
        &self.risk
    }

    /// Number of distinct failure times `N`.
    pub fn failure_count(&self) -> usize {
        self.risk.len()
    }

    /// Warning state: the sample carries no usable event.
    pub fn no_events(&self) -> bool {
        self.risk.is_empty()
    }

    pub fn tie_flag(&self) -> bool {
        self.risk.tie_flag()
    }

    /// Number of subjects with `Z_i >= t`.
    pub fn at_risk_count(&self, t: f64) -> usize {
        let order = self.risk.order();
        order.len() - order.partition_point(|&i| self.records[i].time < t)
    }

    /// Subjects with `Z_i >= t`.
    pub fn at_risk(&self, t: f64) -> &[usize] {
        let order = self.risk.order();
        &order[order.partition_point(|&i| self.records[i].time < t)..]
    }
}

/// Descriptive summary of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n: usize,
    pub p: usize,
    /// Distinct failure times `N`.
    pub failure_times: usize,
    /// Observed events up to the study end.
    pub events: usize,
    pub censoring_rate: f64,
    pub min_time: f64,
    pub max_time: f64,
    pub study_end: f64,
    pub covariate_ranges: Vec<[f64; 2]>,
    pub tie_flag: bool,
}

pub fn summarize_dataset(ds: &SurvivalDataset) -> DatasetSummary {
    let rec = ds.records();
    let p = ds.p();
    let mut ranges = alloc::vec![[f64::INFINITY, f64::NEG_INFINITY]; p];
    for r in rec {
        for (range, &x) in ranges.iter_mut().zip(&r.covariates) {
            range[0] = range[0].min(x);
            range[1] = range[1].max(x);
        }
    }
    let events = ds.risk_sets().event_count();
    DatasetSummary {
        n: ds.n(),
        p,
        failure_times: ds.failure_count(),
        events,
        censoring_rate: 1.0 - events as f64 / ds.n() as f64,
        min_time: rec.iter().map(|r| r.time).fold(f64::INFINITY, f64::min),
        max_time: rec.iter().map(|r| r.time).fold(f64::NEG_INFINITY, f64::max),
        study_end: ds.study_end(),
        covariate_ranges: ranges,
        tie_flag: ds.tie_flag(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn rec(t: f64, e: bool, x: f64) -> SurvivalRecord {
        SurvivalRecord::new(t, e, vec![x])
    }

    fn sorted(s: &[usize]) -> Vec<usize> {
        let mut v = s.to_vec();
        v.sort();
        v
    }

    #[test]
    fn three_record_example() {
        let ds = SurvivalDataset::new(
            vec![rec(3.0, true, 0.5), rec(1.0, false, 0.2), rec(2.0, true, 0.9)],
            CovariateBounds::default(),
            None,
        )
        .unwrap();
        assert_eq!(ds.n(), 3);
        assert_eq!(ds.failure_count(), 2);
        assert_eq!(ds.risk_sets().failure_times(), &[2.0, 3.0]);
        assert_eq!(sorted(ds.risk_sets().risk_set(0)), vec![0, 2]);
        assert_eq!(sorted(ds.risk_sets().risk_set(1)), vec![0]);
        let s = summarize_dataset(&ds);
        assert!((s.censoring_rate - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn single_subject_and_ties() {
        let r = build_risk_sets(&[rec(5.0, true, 0.0)], 5.0);
        assert_eq!(r.failure_times(), &[5.0]);
        assert_eq!(r.risk_set(0), &[0]);
        let r = build_risk_sets(&[rec(2.0, true, 0.0), rec(2.0, true, 0.0)], 2.0);
        assert_eq!(r.len(), 1);
        assert!(r.tie_flag());
        assert_eq!(sorted(r.risk_set(0)), vec![0, 1]);
        assert_eq!(sorted(r.events_at(0)), vec![0, 1]);
    }

    #[test]
    fn all_censored_is_a_warning_state() {
        let ds = SurvivalDataset::new(
            vec![rec(1.0, false, 0.1), rec(2.0, false, 0.2)],
            CovariateBounds::default(),
            None,
        )
        .unwrap();
        assert!(ds.no_events());
        assert_eq!(summarize_dataset(&ds).censoring_rate, 1.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(
            SurvivalDataset::new(vec![], CovariateBounds::default(), None),
            Err(Error::NoRecords)
        );
        let err = SurvivalDataset::new(
            vec![rec(1.0, true, 0.5), rec(-1.0, true, 0.5)],
            CovariateBounds::default(),
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidRecord { row: 1, .. }));
        let err = SurvivalDataset::new(vec![rec(1.0, true, 1.5)], CovariateBounds::default(), None)
            .unwrap_err();
        assert!(matches!(err, Error::CovariateOutOfBounds { row: 0, column: 0, .. }));
    }

    #[test]
    fn events_after_study_end_are_dropped() {
        let ds = SurvivalDataset::new(
            vec![rec(1.0, true, 0.5), rec(4.0, true, 0.5)],
            CovariateBounds::default(),
            Some(2.0),
        )
        .unwrap();
        assert_eq!(ds.risk_sets().failure_times(), &[1.0]);
        assert_eq!(ds.risk_sets().last_at_risk(1), Some(0));
    }
}
