//! Seeded synthetic driving histories.
//!
//! Most vehicles are commuters with a habitual departure and return time and
//! a habitual distance; the rest are shift workers rotating between a few
//! personal shifts. Every day holds at most one trip span: the vehicle is
//! plugged in before it leaves and after it returns. Weekends have more
//! no-trip days and shorter midday trips.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::fleet::{DayRecord, EvParams, PriceSeries, TimeGrid, Weekday};
use crate::{Error, Result};

/// One trip span. The vehicle leaves at the start of period `depart_period`
/// and is plugged in again from period `arrive_period` on (both 1-based), so
/// it is away in `depart_period..arrive_period`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripSpec {
    pub depart_period: usize,
    pub arrive_period: usize,
    pub distance_km: f64,
}

impl TripSpec {
    pub fn check(&self, n_periods: usize) -> Result<()> {
        if !(1 <= self.depart_period && self.depart_period < self.arrive_period && self.arrive_period <= n_periods) {
            return Err(Error::Validation(format!(
                "trip window {}..{} outside 1..={n_periods}",
                self.depart_period, self.arrive_period
            )));
        }
        if !(self.distance_km >= 0.0 && self.distance_km.is_finite()) {
            return Err(Error::Validation(format!("trip distance {} km", self.distance_km)));
        }
        Ok(())
    }

    /// Availability and consumption over the day. Half the energy is spent
    /// on the way out, right after departure, and half on the way back,
    /// right before arrival; each leg lasts as long as the distance takes at
    /// `speed_kmh`, within the away window.
    pub fn profile(&self, grid: &TimeGrid, kwh_per_km: f64, speed_kmh: f64) -> (Vec<bool>, Vec<f64>) {
        let n = grid.n_periods;
        let (d, a) = (self.depart_period - 1, self.arrive_period - 1);
        let mut alpha = vec![true; n];
        let mut xi = vec![0.0; n];
        for slot in &mut alpha[d..a] {
            *slot = false;
        }
        let energy = self.distance_km * kwh_per_km;
        if energy == 0.0 {
            return (alpha, xi);
        }
        let away = a - d;
        if away == 1 {
            xi[d] = energy;
            return (alpha, xi);
        }
        let per_leg = (self.distance_km / 2.0 / (speed_kmh * grid.dt_hours)).ceil().max(1.0) as usize;
        let leg = per_leg.min(away / 2);
        for t in d..d + leg {
            xi[t] += energy / 2.0 / leg as f64;
        }
        for t in a - leg..a {
            xi[t] += energy / 2.0 / leg as f64;
        }
        (alpha, xi)
    }
}

/// Generator settings. Times are 1-based period indices; spreads are
/// standard deviations in periods. Read from a flat TOML file where every
/// key is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub n_vehicles: usize,
    pub n_days: usize,
    pub n_periods: usize,
    pub dt_hours: f64,
    /// Weekday of the first day, 0 = Monday.
    pub start_weekday: usize,
    pub depart_mean: f64,
    pub depart_spread: f64,
    pub arrive_mean: f64,
    pub arrive_spread: f64,
    /// Spread of each commuter's habitual times around the fleet means.
    pub habit_spread: f64,
    /// Parameters of the lognormal habitual distance (km).
    pub distance_log_mean: f64,
    pub distance_log_sd: f64,
    /// Day-to-day lognormal spread of the distance around the habit.
    pub distance_day_sd: f64,
    pub no_trip_prob: f64,
    pub weekend_no_trip_prob: f64,
    pub shift_worker_share: f64,
    pub speed_kmh: f64,
    pub price_base: f64,
    pub price_peak: f64,
    pub price_day_sd: f64,
    pub price_noise: f64,
    pub max_charge_kw: f64,
    pub efficiency: f64,
    pub e_min_kwh: f64,
    pub e_max_kwh: f64,
    pub kwh_per_km: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        let ev = EvParams::reference();
        GeneratorConfig {
            seed: 1,
            n_vehicles: 100,
            n_days: 57,
            n_periods: 96,
            dt_hours: 0.25,
            start_weekday: 0,
            depart_mean: 31.0,
            depart_spread: 2.0,
            arrive_mean: 71.0,
            arrive_spread: 3.0,
            habit_spread: 6.0,
            distance_log_mean: 3.3,
            distance_log_sd: 0.5,
            distance_day_sd: 0.25,
            no_trip_prob: 0.05,
            weekend_no_trip_prob: 0.4,
            shift_worker_share: 0.2,
            speed_kmh: 40.0,
            price_base: 0.05,
            price_peak: 0.025,
            price_day_sd: 0.1,
            price_noise: 0.004,
            max_charge_kw: ev.max_charge_kw,
            efficiency: ev.efficiency,
            e_min_kwh: ev.e_min_kwh,
            e_max_kwh: ev.e_max_kwh,
            kwh_per_km: ev.kwh_per_km,
        }
    }
}

impl GeneratorConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: GeneratorConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.as_ref().display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.n_periods, self.dt_hours)
    }

    /// Identical vehicles starting half full.
    pub fn fleet(&self) -> Vec<EvParams> {
        let ev = EvParams {
            max_charge_kw: self.max_charge_kw,
            efficiency: self.efficiency,
            e_min_kwh: self.e_min_kwh,
            e_max_kwh: self.e_max_kwh,
            e_init_kwh: (self.e_min_kwh + self.e_max_kwh) / 2.0,
            kwh_per_km: self.kwh_per_km,
        };
        vec![ev; self.n_vehicles]
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let n = self.n_periods as f64;
        if self.n_vehicles == 0 {
            problems.push("n_vehicles must be at least 1".to_string());
        }
        if self.n_days == 0 {
            problems.push("n_days must be at least 1".to_string());
        }
        if self.n_periods < 2 {
            problems.push("n_periods must be at least 2".to_string());
        }
        if !(self.dt_hours > 0.0 && self.dt_hours.is_finite()) {
            problems.push("dt_hours must be positive".to_string());
        }
        if self.start_weekday > 6 {
            problems.push("start_weekday must be in 0..=6".to_string());
        }
        for (name, v) in [("depart_mean", self.depart_mean), ("arrive_mean", self.arrive_mean)] {
            if !(1.0..=n).contains(&v) {
                problems.push(format!("{name} = {v} outside [1, {n}]"));
            }
        }
        if self.depart_mean >= self.arrive_mean {
            problems.push("depart_mean must precede arrive_mean".to_string());
        }
        for (name, v) in [
            ("depart_spread", self.depart_spread),
            ("arrive_spread", self.arrive_spread),
            ("habit_spread", self.habit_spread),
            ("distance_log_sd", self.distance_log_sd),
            ("distance_day_sd", self.distance_day_sd),
            ("price_day_sd", self.price_day_sd),
            ("price_noise", self.price_noise),
            ("price_base", self.price_base),
            ("price_peak", self.price_peak),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                problems.push(format!("{name} must be nonnegative"));
            }
        }
        if !self.distance_log_mean.is_finite() {
            problems.push("distance_log_mean must be finite".to_string());
        }
        if !(self.speed_kmh > 0.0 && self.speed_kmh.is_finite()) {
            problems.push("speed_kmh must be positive".to_string());
        }
        for (name, p) in [
            ("no_trip_prob", self.no_trip_prob),
            ("weekend_no_trip_prob", self.weekend_no_trip_prob),
            ("shift_worker_share", self.shift_worker_share),
        ] {
            if !(0.0..=1.0).contains(&p) {
                problems.push(format!("{name} = {p} outside [0, 1]"));
            }
        }
        if !problems.is_empty() {
            return Err(Error::Config(problems.join("; ")));
        }
        if let Ok(grid) = self.grid() {
            crate::fleet::validate_fleet(&self.fleet()[..1], &grid, &[crate::fleet::UncertaintySet::free(self.n_periods, 0)])
                .into_result()
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }
}

/// Daily routine of one vehicle.
#[derive(Debug, Clone)]
enum Habit {
    Commuter { depart: f64, arrive: f64, distance_km: f64 },
    Shifts { shifts: Vec<(f64, f64)>, distance_km: f64 },
}

/// Rounds a normal draw to a period in `lo..=hi`, redrawing out-of-range
/// values a bounded number of times before clamping.
fn discrete_normal(r: &mut ChaCha8Rng, mean: f64, sd: f64, lo: usize, hi: usize) -> usize {
    let normal = Normal::new(mean, sd.max(1e-9)).expect("finite parameters");
    for _ in 0..64 {
        let x = normal.sample(r).round();
        if x >= lo as f64 && x <= hi as f64 {
            return x as usize;
        }
    }
    (mean.round().max(lo as f64) as usize).min(hi)
}

fn draw_habit(cfg: &GeneratorConfig, r: &mut ChaCha8Rng) -> Habit {
    let n = cfg.n_periods as f64;
    let distance = LogNormal::new(cfg.distance_log_mean, cfg.distance_log_sd.max(1e-9)).expect("finite parameters");
    let distance_km = distance.sample(r);
    if r.gen_bool(cfg.shift_worker_share) {
        let count = r.gen_range(2..=3);
        let shifts = (0..count)
            .map(|_| {
                let start = r.gen_range(1.0..(0.6 * n).max(2.0));
                let length = r.gen_range(0.3 * n..0.45 * n);
                (start, (start + length).min(n))
            })
            .collect();
        Habit::Shifts { shifts, distance_km }
    } else {
        let habit = Normal::new(0.0, cfg.habit_spread.max(1e-9)).expect("finite parameters");
        let depart = (cfg.depart_mean + habit.sample(r)).clamp(1.0, n - 1.0);
        let arrive = (cfg.arrive_mean + habit.sample(r)).clamp(depart + 1.0, n);
        Habit::Commuter { depart, arrive, distance_km }
    }
}

fn draw_trip(cfg: &GeneratorConfig, habit: &Habit, weekday: Weekday, r: &mut ChaCha8Rng) -> Option<TripSpec> {
    let n = cfg.n_periods;
    let skip = if weekday.is_weekend() { cfg.weekend_no_trip_prob } else { cfg.no_trip_prob };
    if r.gen_bool(skip) {
        return None;
    }
    let jitter = LogNormal::new(0.0, cfg.distance_day_sd.max(1e-9)).expect("finite parameters");
    let (depart_mean, arrive_mean, habit_km) = if weekday.is_weekend() {
        let (base_km, scale) = match habit {
            Habit::Commuter { distance_km, .. } | Habit::Shifts { distance_km, .. } => (*distance_km, 0.6),
        };
        let start = 0.35 * n as f64 + r.gen_range(-0.1..0.15) * n as f64;
        (start, start + r.gen_range(0.06..0.2) * n as f64, base_km * scale)
    } else {
        match habit {
            Habit::Commuter { depart, arrive, distance_km } => (*depart, *arrive, *distance_km),
            Habit::Shifts { shifts, distance_km } => {
                let (a, b) = shifts[r.gen_range(0..shifts.len())];
                (a, b, *distance_km)
            }
        }
    };
    let depart = discrete_normal(r, depart_mean, cfg.depart_spread, 1, n - 1);
    let arrive = discrete_normal(r, arrive_mean, cfg.arrive_spread, depart + 1, n);
    let distance_km = (habit_km * jitter.sample(r) * 10.0).round() / 10.0;
    Some(TripSpec { depart_period: depart, arrive_period: arrive, distance_km })
}

fn day_prices(cfg: &GeneratorConfig, weekday: Weekday, r: &mut ChaCha8Rng) -> Vec<f64> {
    let n = cfg.n_periods;
    let level = 1.0 + Normal::new(0.0, cfg.price_day_sd.max(1e-12)).expect("finite").sample(r);
    let weekend = if weekday.is_weekend() { 0.9 } else { 1.0 };
    let noise = Normal::new(0.0, cfg.price_noise.max(1e-12)).expect("finite");
    let horizon = cfg.n_periods as f64 * cfg.dt_hours;
    (0..n)
        .map(|t| {
            // Daily shape on a 24 h clock: night valley, morning and evening peaks.
            let h = (t as f64 + 0.5) * cfg.dt_hours * 24.0 / horizon;
            let bump = |centre: f64, width: f64| (-((h - centre) / width).powi(2)).exp();
            let shape = 0.8 * bump(9.0, 2.0) + bump(20.5, 2.0) - 0.5 * bump(4.0, 2.5);
            let p = (cfg.price_base + cfg.price_peak * shape) * level * weekend + noise.sample(r);
            (p.max(0.001) * 1e5).round() / 1e5
        })
        .collect()
}

/// Generates `cfg.n_days` days for `cfg.n_vehicles` vehicles. Days are
/// numbered from 1.
pub fn generate_history(cfg: &GeneratorConfig) -> Result<Vec<DayRecord>> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
    let habits: Vec<Habit> = (0..cfg.n_vehicles).map(|_| draw_habit(cfg, &mut r)).collect();
    let first = Weekday::from_index(cfg.start_weekday).expect("validated");
    let mut days = Vec::with_capacity(cfg.n_days);
    for d in 0..cfg.n_days {
        let weekday = first.offset(d as i64);
        let prices = day_prices(cfg, weekday, &mut r);
        let mut realized_alpha = Vec::with_capacity(cfg.n_vehicles);
        let mut realized_xi_kwh = Vec::with_capacity(cfg.n_vehicles);
        for habit in &habits {
            match draw_trip(cfg, habit, weekday, &mut r) {
                Some(trip) => {
                    let (a, x) = trip.profile(&grid, cfg.kwh_per_km, cfg.speed_kmh);
                    realized_alpha.push(a);
                    realized_xi_kwh.push(x);
                }
                None => {
                    realized_alpha.push(vec![true; grid.n_periods]);
                    realized_xi_kwh.push(vec![0.0; grid.n_periods]);
                }
            }
        }
        days.push(DayRecord {
            date_index: d as i64 + 1,
            weekday,
            realized_alpha,
            realized_xi_kwh,
            prices: PriceSeries::new(prices),
        });
    }
    Ok(days)
}
