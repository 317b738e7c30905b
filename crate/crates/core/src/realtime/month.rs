//! Day and month evaluation: forecast, solve, re-dispatch, measure.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{simulate_realtime_with, DayMetrics, RealtimeOutcome};
use crate::data::day_ahead_instance;
use crate::deterministic::solve_deterministic_with;
use crate::fleet::{DayRecord, EvParams, ScheduleSolution, TimeGrid, Weekday};
use crate::robust::{solve_robust_with, RobustInstance, RobustOptions, DEFAULT_PENALTY};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Deterministic,
    Robust,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Robust => "robust",
            Method::Deterministic => "deterministic",
        }
    }

    /// Day-ahead schedule of this method.
    pub fn solve(self, inst: &RobustInstance, opts: &RobustOptions) -> Result<ScheduleSolution> {
        match self {
            Method::Robust => Ok(solve_robust_with(inst, opts)?.schedule),
            Method::Deterministic => solve_deterministic_with(inst, opts.threads, &opts.milp.lp),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "robust" => Ok(Method::Robust),
            "deterministic" => Ok(Method::Deterministic),
            _ => Err(Error::Config(format!("unknown method `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodSelector {
    Robust,
    Deterministic,
    Both,
}

impl MethodSelector {
    /// Methods in report order.
    pub fn methods(self) -> Vec<Method> {
        match self {
            MethodSelector::Robust => vec![Method::Robust],
            MethodSelector::Deterministic => vec![Method::Deterministic],
            MethodSelector::Both => vec![Method::Deterministic, Method::Robust],
        }
    }
}

impl FromStr for MethodSelector {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "robust" => Ok(MethodSelector::Robust),
            "deterministic" => Ok(MethodSelector::Deterministic),
            "both" => Ok(MethodSelector::Both),
            _ => Err(Error::Config(format!("unknown method selector `{s}` (robust, deterministic or both)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DayEvaluation {
    pub schedule: ScheduleSolution,
    pub outcome: RealtimeOutcome,
    pub metrics: DayMetrics,
}

/// Solves `inst` with `method` and re-dispatches the purchase on `realized`.
pub fn evaluate_day(inst: &RobustInstance, method: Method, realized: &DayRecord, opts: &RobustOptions) -> Result<DayEvaluation> {
    let schedule = method.solve(inst, opts)?;
    let outcome = simulate_realtime_with(&schedule, realized, inst, &opts.milp.lp)?;
    let metrics = DayMetrics::new(&schedule, inst, &outcome);
    Ok(DayEvaluation { schedule, outcome, metrics })
}

#[derive(Debug, Clone)]
pub struct MonthConfig {
    pub lookback: usize,
    pub penalty_eur_per_kwh: f64,
    pub methods: MethodSelector,
    /// Days to evaluate; `None` takes every day with enough history.
    pub days: Option<Vec<i64>>,
    pub robust: RobustOptions,
}

impl Default for MonthConfig {
    fn default() -> Self {
        MonthConfig {
            lookback: 4,
            penalty_eur_per_kwh: DEFAULT_PENALTY,
            methods: MethodSelector::Both,
            days: None,
            robust: RobustOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayResult {
    pub day: i64,
    pub weekday: Weekday,
    pub method: Method,
    #[serde(flatten)]
    pub metrics: DayMetrics,
}

/// Max, mean, min and total of one metric over the evaluated days.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub max: f64,
    pub mean: f64,
    pub min: f64,
    pub total: f64,
}

impl Aggregate {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Aggregate {
        let mut a = Aggregate { max: f64::NEG_INFINITY, mean: 0.0, min: f64::INFINITY, total: 0.0 };
        let mut count = 0usize;
        for v in values {
            a.max = a.max.max(v);
            a.min = a.min.min(v);
            a.total += v;
            count += 1;
        }
        if count == 0 {
            return Aggregate { max: 0.0, mean: 0.0, min: 0.0, total: 0.0 };
        }
        a.mean = a.total / count as f64;
        a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub days: usize,
    pub c_da_eur: Aggregate,
    pub p_da_kw: Aggregate,
    pub d_rt_kwh: Aggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthReport {
    pub lookback: usize,
    pub penalty_eur_per_kwh: f64,
    /// Ordered by day, then by method.
    pub days: Vec<DayResult>,
    pub summary: Vec<MethodSummary>,
}

impl MonthReport {
    pub fn from_days(days: Vec<DayResult>, lookback: usize, penalty_eur_per_kwh: f64) -> MonthReport {
        let mut methods: Vec<Method> = days.iter().map(|d| d.method).collect();
        methods.sort();
        methods.dedup();
        let summary = methods
            .into_iter()
            .map(|m| {
                let rows: Vec<&DayResult> = days.iter().filter(|d| d.method == m).collect();
                MethodSummary {
                    method: m,
                    days: rows.len(),
                    c_da_eur: Aggregate::of(rows.iter().map(|d| d.metrics.c_da_eur)),
                    p_da_kw: Aggregate::of(rows.iter().map(|d| d.metrics.p_da_kw)),
                    d_rt_kwh: Aggregate::of(rows.iter().map(|d| d.metrics.d_rt_kwh)),
                }
            })
            .collect();
        MonthReport { lookback, penalty_eur_per_kwh, days, summary }
    }

    pub fn summary_for(&self, method: Method) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.method == method)
    }

    /// `day,method,c_da_eur,p_da_kw,d_rt_kwh`.
    pub fn write_metrics_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Numerical(format!("writing metrics: {e}"));
        w.write_record(["day", "method", "c_da_eur", "p_da_kw", "d_rt_kwh"]).map_err(err)?;
        for d in &self.days {
            w.write_record([
                d.day.to_string(),
                d.method.to_string(),
                d.metrics.c_da_eur.to_string(),
                d.metrics.p_da_kw.to_string(),
                d.metrics.d_rt_kwh.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Rolling evaluation: each selected day is forecast from the days before it,
/// solved by every selected method and re-dispatched against its own
/// realization. `on_day` sees each result as it is produced.
pub fn evaluate_month(
    history: &[DayRecord],
    fleet: &[EvParams],
    grid: TimeGrid,
    cfg: &MonthConfig,
    mut on_day: impl FnMut(&DayResult),
) -> Result<MonthReport> {
    let mut ordered: Vec<&DayRecord> = history.iter().collect();
    ordered.sort_by_key(|d| d.date_index);
    if let Some(filter) = &cfg.days {
        if filter.is_empty() {
            return Err(Error::Config("day filter is empty".into()));
        }
        for d in filter {
            if !history.iter().any(|h| h.date_index == *d) {
                return Err(Error::Config(format!("day {d} is not in the history")));
            }
        }
    }
    let mut results = Vec::new();
    for day in ordered {
        if let Some(filter) = &cfg.days {
            if !filter.contains(&day.date_index) {
                continue;
            }
        }
        let inst = match day_ahead_instance(
            history,
            fleet,
            grid,
            day.date_index,
            day.weekday,
            cfg.lookback,
            cfg.penalty_eur_per_kwh,
        ) {
            Ok(inst) => inst,
            Err(Error::InsufficientHistory(_)) if cfg.days.is_none() => continue,
            Err(e) => return Err(e),
        };
        for method in cfg.methods.methods() {
            let eval = evaluate_day(&inst, method, day, &cfg.robust)?;
            let r = DayResult { day: day.date_index, weekday: day.weekday, method, metrics: eval.metrics };
            on_day(&r);
            results.push(r);
        }
    }
    if results.is_empty() {
        return Err(Error::InsufficientHistory(format!(
            "no day has {} earlier days of the same weekday",
            cfg.lookback
        )));
    }
    Ok(MonthReport::from_days(results, cfg.lookback, cfg.penalty_eur_per_kwh))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregates() {
        let a = Aggregate::of([3.0, 1.0, 2.0]);
        assert_eq!((a.max, a.mean, a.min, a.total), (3.0, 2.0, 1.0, 6.0));
    }

    #[test]
    fn selector_parsing() {
        assert_eq!("both".parse::<MethodSelector>().unwrap().methods().len(), 2);
        assert!("neither".parse::<MethodSelector>().is_err());
        assert_eq!("robust".parse::<Method>().unwrap(), Method::Robust);
    }
}
