//! Domain types shared by every model: time grid, vehicles, prices,
//! availability sets, forecasts, schedules and realized days.
//!
//! Energies are in kWh, power in kW, money in EUR. `dt_hours` converts
//! power to energy per period.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::{Error, Result};

/// Tolerance used when checking solver output against model bounds.
pub const SOLUTION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub n_periods: usize,
    pub dt_hours: f64,
}

impl TimeGrid {
    pub fn new(n_periods: usize, dt_hours: f64) -> Result<Self> {
        if n_periods == 0 {
            return Err(Error::Validation("time grid needs at least one period".into()));
        }
        if !(dt_hours > 0.0 && dt_hours.is_finite()) {
            return Err(Error::Validation(format!("period length must be positive, got {dt_hours}")));
        }
        Ok(TimeGrid { n_periods, dt_hours })
    }

    /// 96 quarter-hour periods.
    pub fn quarter_hourly_day() -> Self {
        TimeGrid { n_periods: 96, dt_hours: 0.25 }
    }

    pub fn horizon_hours(&self) -> f64 {
        self.n_periods as f64 * self.dt_hours
    }
}

/// Static technical description of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvParams {
    pub max_charge_kw: f64,
    pub efficiency: f64,
    pub e_min_kwh: f64,
    pub e_max_kwh: f64,
    pub e_init_kwh: f64,
    pub kwh_per_km: f64,
}

impl EvParams {
    /// Compact city car: 7.4 kW charger, 0.95 efficiency, 10..51 kWh
    /// usable window, 0.137 kWh/km, starting at the window midpoint.
    pub fn reference() -> Self {
        EvParams {
            max_charge_kw: 7.4,
            efficiency: 0.95,
            e_min_kwh: 10.0,
            e_max_kwh: 51.0,
            e_init_kwh: 30.5,
            kwh_per_km: 0.137,
        }
    }

    /// Energy delivered to the battery per kW charged during one period.
    pub fn energy_per_kw(&self, grid: &TimeGrid) -> f64 {
        grid.dt_hours * self.efficiency
    }

    fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let all = [
            self.max_charge_kw,
            self.efficiency,
            self.e_min_kwh,
            self.e_max_kwh,
            self.e_init_kwh,
            self.kwh_per_km,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            out.push("non-finite parameter".to_string());
            return out;
        }
        if self.max_charge_kw < 0.0 {
            out.push("negative maximum charging power".into());
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            out.push("efficiency outside (0, 1]".into());
        }
        if self.e_min_kwh < 0.0 || self.kwh_per_km < 0.0 {
            out.push("negative energy parameter".into());
        }
        if self.e_min_kwh > self.e_max_kwh {
            out.push("minimum SOC above maximum".into());
        }
        if self.e_init_kwh < self.e_min_kwh {
            out.push("initial SOC below minimum".into());
        }
        if self.e_init_kwh > self.e_max_kwh {
            out.push("initial SOC above maximum".into());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    pub eur_per_kwh: Vec<f64>,
}

impl PriceSeries {
    pub fn new(eur_per_kwh: Vec<f64>) -> Self {
        PriceSeries { eur_per_kwh }
    }

    pub fn check(&self, grid: &TimeGrid) -> Result<()> {
        if self.eur_per_kwh.len() != grid.n_periods {
            return Err(Error::Validation(format!(
                "price series has {} entries for {} periods",
                self.eur_per_kwh.len(),
                grid.n_periods
            )));
        }
        if self.eur_per_kwh.iter().any(|p| !p.is_finite()) {
            return Err(Error::Validation("price series contains non-finite values".into()));
        }
        Ok(())
    }
}

/// Box bounds on availability plus a floor on the number of available periods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySet {
    pub alpha_lo: Vec<bool>,
    pub alpha_hi: Vec<bool>,
    pub k_min: usize,
}

impl UncertaintySet {
    /// The set containing only `alpha`.
    pub fn fixed(alpha: &[bool]) -> Self {
        UncertaintySet {
            alpha_lo: alpha.to_vec(),
            alpha_hi: alpha.to_vec(),
            k_min: alpha.iter().filter(|&&a| a).count(),
        }
    }

    /// No forced periods, every period possibly available, at least `k` available.
    pub fn free(n_periods: usize, k: usize) -> Self {
        UncertaintySet {
            alpha_lo: vec![false; n_periods],
            alpha_hi: vec![true; n_periods],
            k_min: k,
        }
    }

    pub fn len(&self) -> usize {
        self.alpha_lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha_hi.iter().filter(|&&a| a).count() < self.k_min
    }

    pub fn forced_ones(&self) -> usize {
        self.alpha_lo.iter().filter(|&&a| a).count()
    }

    /// Whether `alpha` lies in the set.
    pub fn contains(&self, alpha: &[bool]) -> bool {
        alpha.len() == self.len()
            && alpha.iter().filter(|&&a| a).count() >= self.k_min
            && alpha
                .iter()
                .zip(self.alpha_lo.iter().zip(&self.alpha_hi))
                .all(|(&a, (&lo, &hi))| (!lo || a) && (a <= hi))
    }

    fn violations(&self, grid: &TimeGrid) -> Vec<String> {
        let mut out = Vec::new();
        if self.alpha_lo.len() != grid.n_periods || self.alpha_hi.len() != grid.n_periods {
            out.push("uncertainty set length differs from the time grid".into());
            return out;
        }
        if self.alpha_lo.iter().zip(&self.alpha_hi).any(|(&lo, &hi)| lo && !hi) {
            out.push("lower availability bound above upper bound".into());
        }
        if self.is_empty() {
            out.push("empty uncertainty set".into());
        }
        out
    }
}

/// Expected availability and consumption of one vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastInputs {
    pub alpha_hat: Vec<f64>,
    pub xi_hat_kwh: Vec<f64>,
}

impl ForecastInputs {
    pub fn total_consumption(&self) -> f64 {
        self.xi_hat_kwh.iter().sum()
    }

    fn violations(&self, grid: &TimeGrid) -> Vec<String> {
        let mut out = Vec::new();
        if self.alpha_hat.len() != grid.n_periods || self.xi_hat_kwh.len() != grid.n_periods {
            out.push("forecast length differs from the time grid".into());
            return out;
        }
        if self.alpha_hat.iter().any(|a| !(0.0..=1.0).contains(a)) {
            out.push("expected availability outside [0, 1]".into());
        }
        if self.xi_hat_kwh.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            out.push("negative or non-finite expected consumption".into());
        }
        out
    }
}

/// Charging plan for a fleet; matrices are indexed `[vehicle][period]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScheduleSolution {
    pub charge_kw: Vec<Vec<f64>>,
    pub linear_charge_kw: Vec<Vec<f64>>,
    pub soc_kwh: Vec<Vec<f64>>,
    pub slack_pos_kwh: Vec<Vec<f64>>,
    pub slack_neg_kwh: Vec<Vec<f64>>,
    pub wc_alpha: Vec<Vec<bool>>,
    pub wc_energy_kwh: Vec<f64>,
    pub dual_k: Vec<f64>,
    pub dual_lo: Vec<Vec<f64>>,
    pub dual_hi: Vec<Vec<f64>>,
    pub objective_eur: f64,
}

impl ScheduleSolution {
    pub fn num_vehicles(&self) -> usize {
        self.charge_kw.len()
    }

    /// Aggregate purchased power per period, `sum_v c[v][t]`.
    pub fn purchased_kw(&self) -> Vec<f64> {
        let t = self.charge_kw.first().map_or(0, Vec::len);
        (0..t)
            .map(|p| self.charge_kw.iter().map(|row| row[p]).sum())
            .collect()
    }

    /// Checks the solution against the bounds of its fleet and the sign
    /// conventions of the lower-level duals.
    pub fn validate(&self, fleet: &[EvParams], grid: &TimeGrid) -> ValidationReport {
        let mut report = ValidationReport::default();
        let tol = SOLUTION_TOL;
        if self.num_vehicles() != fleet.len() {
            report.push(None, "solution and fleet differ in size");
            return report;
        }
        for (v, ev) in fleet.iter().enumerate() {
            let t = grid.n_periods;
            let shapes = [
                self.charge_kw[v].len(),
                self.linear_charge_kw[v].len(),
                self.soc_kwh[v].len(),
                self.slack_pos_kwh[v].len(),
                self.slack_neg_kwh[v].len(),
                self.wc_alpha[v].len(),
                self.dual_lo[v].len(),
                self.dual_hi[v].len(),
            ];
            if shapes.iter().any(|&s| s != t) {
                report.push(Some(v), "matrix row length differs from the time grid");
                continue;
            }
            if self.charge_kw[v].iter().any(|&c| c < -tol || c > ev.max_charge_kw + tol) {
                report.push(Some(v), "charging power outside [0, max]");
            }
            if self.soc_kwh[v].iter().any(|&e| e < ev.e_min_kwh - tol || e > ev.e_max_kwh + tol) {
                report.push(Some(v), "state of charge outside its window");
            }
            if self.slack_pos_kwh[v].iter().chain(&self.slack_neg_kwh[v]).any(|&s| s < -tol) {
                report.push(Some(v), "negative slack");
            }
            if self.dual_k[v] < -tol || self.dual_lo[v].iter().any(|&b| b < -tol) {
                report.push(Some(v), "negative availability dual");
            }
            if self.dual_hi[v].iter().any(|&b| b > tol) {
                report.push(Some(v), "positive upper-bound dual");
            }
        }
        report
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Weekday {
    Monday,
    Tuesday,
    Wednesday,
    Thursday,
    Friday,
    Saturday,
    Sunday,
}

impl Weekday {
    pub const ALL: [Weekday; 7] = [
        Weekday::Monday,
        Weekday::Tuesday,
        Weekday::Wednesday,
        Weekday::Thursday,
        Weekday::Friday,
        Weekday::Saturday,
        Weekday::Sunday,
    ];

    pub fn from_index(i: usize) -> Option<Weekday> {
        Self::ALL.get(i).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Weekday `days` after `self`.
    pub fn offset(self, days: i64) -> Weekday {
        Self::ALL[(self.index() as i64 + days).rem_euclid(7) as usize]
    }

    pub fn is_weekend(self) -> bool {
        matches!(self, Weekday::Saturday | Weekday::Sunday)
    }
}

impl fmt::Display for Weekday {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Realized availability, consumption and prices of one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayRecord {
    pub date_index: i64,
    pub weekday: Weekday,
    pub realized_alpha: Vec<Vec<bool>>,
    pub realized_xi_kwh: Vec<Vec<f64>>,
    pub prices: PriceSeries,
}

impl DayRecord {
    pub fn num_vehicles(&self) -> usize {
        self.realized_alpha.len()
    }

    /// Dimensions agree and a vehicle that consumes energy is never available.
    pub fn check(&self, n_vehicles: usize, grid: &TimeGrid) -> Result<()> {
        if self.realized_alpha.len() != n_vehicles || self.realized_xi_kwh.len() != n_vehicles {
            return Err(Error::Validation(format!(
                "day {} has {} vehicles, expected {n_vehicles}",
                self.date_index,
                self.realized_alpha.len()
            )));
        }
        self.prices.check(grid)?;
        for v in 0..n_vehicles {
            let (a, x) = (&self.realized_alpha[v], &self.realized_xi_kwh[v]);
            if a.len() != grid.n_periods || x.len() != grid.n_periods {
                return Err(Error::Validation(format!(
                    "day {} vehicle {v}: row length differs from the time grid",
                    self.date_index
                )));
            }
            for t in 0..grid.n_periods {
                if !(x[t].is_finite() && x[t] >= 0.0) {
                    return Err(Error::Validation(format!(
                        "day {} vehicle {v} period {}: invalid consumption {}",
                        self.date_index,
                        t + 1,
                        x[t]
                    )));
                }
                if a[t] && x[t] > 0.0 {
                    return Err(Error::Validation(format!(
                        "day {} vehicle {v} period {}: consumption while available",
                        self.date_index,
                        t + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub vehicle: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.vehicle {
            Some(v) => write!(f, "vehicle {v}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn push(&mut self, vehicle: Option<usize>, message: impl Into<String>) {
        self.violations.push(Violation { vehicle, message: message.into() });
    }

    pub fn has(&self, message: &str) -> bool {
        self.violations.iter().any(|v| v.message == message)
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            let msg = self.violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
            Err(Error::Validation(msg))
        }
    }
}

/// Checks vehicles and their uncertainty sets against model preconditions.
pub fn validate_fleet(fleet: &[EvParams], grid: &TimeGrid, sets: &[UncertaintySet]) -> ValidationReport {
    let mut report = ValidationReport::default();
    if !(grid.n_periods >= 1 && grid.dt_hours > 0.0) {
        report.push(None, "invalid time grid");
    }
    if fleet.len() != sets.len() {
        report.push(None, format!("{} vehicles but {} uncertainty sets", fleet.len(), sets.len()));
        return report;
    }
    for (v, (ev, set)) in fleet.iter().zip(sets).enumerate() {
        for msg in ev.violations().into_iter().chain(set.violations(grid)) {
            report.push(Some(v), msg);
        }
    }
    report
}

/// Checks forecasts for dimension and range errors.
pub(crate) fn validate_forecasts(forecasts: &[ForecastInputs], grid: &TimeGrid, report: &mut ValidationReport) {
    for (v, f) in forecasts.iter().enumerate() {
        for msg in f.violations(grid) {
            report.push(Some(v), msg);
        }
    }
}
