//! Expected values and uncertainty sets from history.

use crate::fleet::{DayRecord, EvParams, ForecastInputs, PriceSeries, TimeGrid, UncertaintySet, Weekday};
use crate::robust::RobustInstance;
use crate::{Error, Result};

/// The days a forecast for `target_day` draws on.
#[derive(Debug, Clone, PartialEq)]
pub struct Lookback<'h> {
    /// The last `lookback` days with the target's weekday, oldest first.
    pub same_weekday: Vec<&'h DayRecord>,
    /// The last `lookback` days of any weekday, oldest first.
    pub recent: Vec<&'h DayRecord>,
}

/// Selects the history used for a forecast of `target_day`. Only days
/// strictly before the target count.
pub fn lookback_days(history: &[DayRecord], target_day: i64, weekday: Weekday, lookback: usize) -> Result<Lookback<'_>> {
    if lookback == 0 {
        return Err(Error::Config("lookback must be at least 1".into()));
    }
    let mut before: Vec<&DayRecord> = history.iter().filter(|d| d.date_index < target_day).collect();
    before.sort_by_key(|d| d.date_index);
    let same: Vec<&DayRecord> = before.iter().copied().filter(|d| d.weekday == weekday).collect();
    if same.len() < lookback {
        return Err(Error::InsufficientHistory(format!(
            "day {target_day} needs {lookback} earlier {weekday}s, history has {} (short by {})",
            same.len(),
            lookback - same.len()
        )));
    }
    if before.len() < lookback {
        return Err(Error::InsufficientHistory(format!(
            "day {target_day} needs {lookback} earlier days for prices, history has {}",
            before.len()
        )));
    }
    Ok(Lookback {
        same_weekday: same[same.len() - lookback..].to_vec(),
        recent: before[before.len() - lookback..].to_vec(),
    })
}

fn mean_columns(rows: impl Iterator<Item = Vec<f64>>) -> Vec<f64> {
    let mut sum: Vec<f64> = Vec::new();
    let mut count = 0usize;
    for row in rows {
        if sum.is_empty() {
            sum = vec![0.0; row.len()];
        }
        for (s, x) in sum.iter_mut().zip(row) {
            *s += x;
        }
        count += 1;
    }
    sum.into_iter().map(|s| s / count as f64).collect()
}

/// Per-vehicle expected availability and consumption over the same-weekday
/// days, and the mean price over the recent days.
pub fn forecast(
    history: &[DayRecord],
    target_day: i64,
    weekday: Weekday,
    lookback: usize,
) -> Result<(Vec<ForecastInputs>, PriceSeries)> {
    let days = lookback_days(history, target_day, weekday, lookback)?;
    Ok(forecast_from(&days))
}

fn forecast_from(days: &Lookback<'_>) -> (Vec<ForecastInputs>, PriceSeries) {
    let n_vehicles = days.same_weekday[0].num_vehicles();
    let inputs = (0..n_vehicles)
        .map(|v| ForecastInputs {
            alpha_hat: mean_columns(
                days.same_weekday.iter().map(|d| d.realized_alpha[v].iter().map(|&a| f64::from(u8::from(a))).collect()),
            ),
            xi_hat_kwh: mean_columns(days.same_weekday.iter().map(|d| d.realized_xi_kwh[v].clone())),
        })
        .collect();
    let prices = PriceSeries::new(mean_columns(days.recent.iter().map(|d| d.prices.eur_per_kwh.clone())));
    (inputs, prices)
}

/// `ᾱ_t` is 1 if vehicle `v` was available at `t` on any day of `days`,
/// `α̲_t` is 1 if it was available on all of them, and `K` is the smallest
/// daily count of available periods, so every observed day lies in the set.
pub fn build_uncertainty_set(days: &[&DayRecord], v: usize) -> Result<UncertaintySet> {
    let first = days.first().ok_or_else(|| Error::InsufficientHistory("no days to build a set from".into()))?;
    let n = first.realized_alpha[v].len();
    let mut lo = vec![true; n];
    let mut hi = vec![false; n];
    let mut k = usize::MAX;
    for d in days {
        let a = &d.realized_alpha[v];
        for t in 0..n {
            lo[t] &= a[t];
            hi[t] |= a[t];
        }
        k = k.min(a.iter().filter(|&&x| x).count());
    }
    Ok(UncertaintySet { alpha_lo: lo, alpha_hi: hi, k_min: k })
}

/// The day-ahead instance for `target_day`: forecasts, prices and one
/// uncertainty set per vehicle from the lookback window.
pub fn day_ahead_instance(
    history: &[DayRecord],
    fleet: &[EvParams],
    grid: TimeGrid,
    target_day: i64,
    weekday: Weekday,
    lookback: usize,
    penalty_eur_per_kwh: f64,
) -> Result<RobustInstance> {
    let days = lookback_days(history, target_day, weekday, lookback)?;
    for d in days.same_weekday.iter().chain(&days.recent) {
        d.check(fleet.len(), &grid)?;
    }
    let (forecasts, prices) = forecast_from(&days);
    let uncertainty = (0..fleet.len())
        .map(|v| build_uncertainty_set(&days.same_weekday, v))
        .collect::<Result<Vec<_>>>()?;
    let inst = RobustInstance {
        fleet: fleet.to_vec(),
        grid,
        prices,
        forecasts,
        uncertainty,
        penalty_eur_per_kwh,
    };
    inst.validate()?;
    Ok(inst)
}
