//! Output files. Numbers use the shortest round-trip form so repeated runs
//! are byte-identical.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use evagg::fleet::{ScheduleSolution, Weekday};
use evagg::realtime::{DayMetrics, Method, MethodSummary, MonthReport};
use evagg::robust::RobustInstance;

pub const SCHEDULE_HEADER: [&str; 8] = ["vehicle", "period", "c_kw", "z_kw", "e_kwh", "s_plus", "s_minus", "alpha_wc"];

/// Shortest round-trip text, without a sign on zero.
fn num(x: f64) -> String {
    if x == 0.0 { "0".to_string() } else { x.to_string() }
}

/// One row per vehicle and period; `vehicles` holds the 1-based numbers to print.
pub fn write_schedule(path: &Path, s: &ScheduleSolution, vehicles: &[usize]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(SCHEDULE_HEADER)?;
    for (v, &number) in vehicles.iter().enumerate() {
        for t in 0..s.charge_kw[v].len() {
            w.write_record([
                number.to_string(),
                (t + 1).to_string(),
                num(s.charge_kw[v][t]),
                num(s.linear_charge_kw[v][t]),
                num(s.soc_kwh[v][t]),
                num(s.slack_pos_kwh[v][t]),
                num(s.slack_neg_kwh[v][t]),
                u8::from(s.wc_alpha[v][t]).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct SolveSummary {
    pub method: Method,
    pub objective_eur: f64,
    pub c_da_eur: f64,
    pub p_da_kw: f64,
    pub penalty_eur: f64,
    pub worst_case_energy_kwh: f64,
}

impl SolveSummary {
    pub fn new(method: Method, s: &ScheduleSolution, inst: &RobustInstance) -> Self {
        let dt = inst.grid.dt_hours;
        let lambda = &inst.prices.eur_per_kwh;
        let mut c_da = 0.0;
        let mut p_da = 0.0;
        let mut slack = 0.0;
        for v in 0..s.num_vehicles() {
            for t in 0..s.charge_kw[v].len() {
                c_da += lambda[t] * s.charge_kw[v][t] * dt;
                p_da += s.charge_kw[v][t];
                slack += s.slack_pos_kwh[v][t] + s.slack_neg_kwh[v][t];
            }
        }
        SolveSummary {
            method,
            objective_eur: s.objective_eur,
            c_da_eur: c_da,
            p_da_kw: p_da,
            penalty_eur: slack * inst.penalty_eur_per_kwh,
            worst_case_energy_kwh: s.wc_energy_kwh.iter().sum(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SolveReport {
    pub day: i64,
    pub weekday: Weekday,
    pub lookback: usize,
    pub penalty_eur_per_kwh: f64,
    pub vehicles: usize,
    pub methods: Vec<SolveSummary>,
}

#[derive(Debug, Serialize)]
pub struct MonthSummary<'a> {
    pub lookback: usize,
    pub penalty_eur_per_kwh: f64,
    pub methods: &'a [MethodSummary],
    /// Relative drop of total D^RT from deterministic to robust, when both ran.
    pub deviation_reduction: Option<f64>,
}

impl<'a> From<&'a MonthReport> for MonthSummary<'a> {
    fn from(r: &'a MonthReport) -> Self {
        let reduction = match (r.summary_for(Method::Deterministic), r.summary_for(Method::Robust)) {
            (Some(d), Some(ro)) if d.d_rt_kwh.total > 0.0 => Some(1.0 - ro.d_rt_kwh.total / d.d_rt_kwh.total),
            _ => None,
        };
        MonthSummary {
            lookback: r.lookback,
            penalty_eur_per_kwh: r.penalty_eur_per_kwh,
            methods: &r.summary,
            deviation_reduction: reduction,
        }
    }
}

/// `day,<method>...`: one column per evaluated method.
pub fn write_daily_series(path: &Path, r: &MonthReport, metric: impl Fn(&DayMetrics) -> f64) -> Result<()> {
    let methods: Vec<Method> = r.summary.iter().map(|s| s.method).collect();
    let mut days: Vec<i64> = r.days.iter().map(|d| d.day).collect();
    days.dedup();
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let mut header = vec!["day".to_string()];
    header.extend(methods.iter().map(|m| m.to_string()));
    w.write_record(&header)?;
    for day in days {
        let mut row = vec![day.to_string()];
        for m in &methods {
            let value = r.days.iter().find(|d| d.day == day && d.method == *m).map(|d| metric(&d.metrics));
            row.push(value.map_or_else(String::new, |v| v.to_string()));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, format!("{text}\n")).with_context(|| format!("writing {}", path.display()))
}
