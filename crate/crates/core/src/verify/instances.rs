//! Seeded instance families for cross-checks. Every generator is a pure
//! function of its seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fleet::{EvParams, ForecastInputs, PriceSeries, TimeGrid, UncertaintySet};
use crate::robust::{RobustInstance, DEFAULT_PENALTY};

/// Inputs of one adversary problem.
#[derive(Debug, Clone)]
pub struct OracleCase {
    pub c: Vec<f64>,
    pub ev: EvParams,
    pub grid: TimeGrid,
    pub set: UncertaintySet,
}

fn rng(family: u64, seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(family.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ seed)
}

fn round_to(x: f64, step: f64) -> f64 {
    (x / step).round() * step
}

fn random_ev(r: &mut ChaCha8Rng, e_min_max: f64, window: (f64, f64)) -> EvParams {
    let e_min = round_to(r.gen_range(0.0..=e_min_max), 0.5);
    let e_max = e_min + round_to(r.gen_range(window.0..=window.1), 0.5);
    EvParams {
        max_charge_kw: round_to(r.gen_range(1.0..=8.0), 0.1),
        efficiency: round_to(r.gen_range(0.8..=1.0), 0.01),
        e_min_kwh: e_min,
        e_max_kwh: e_max,
        e_init_kwh: round_to(r.gen_range(e_min..=e_max), 0.5).clamp(e_min, e_max),
        kwh_per_km: 0.137,
    }
}

/// Periods are forced available, forced unavailable or free with
/// probabilities 0.3, 0.2 and 0.5; the floor is uniform over its feasible range.
fn random_set(r: &mut ChaCha8Rng, n: usize) -> UncertaintySet {
    let mut lo = vec![false; n];
    let mut hi = vec![false; n];
    for t in 0..n {
        let u: f64 = r.gen();
        if u < 0.3 {
            lo[t] = true;
            hi[t] = true;
        } else if u >= 0.5 {
            hi[t] = true;
        }
    }
    let possible = hi.iter().filter(|&&a| a).count();
    let k = r.gen_range(0..=possible);
    UncertaintySet { alpha_lo: lo, alpha_hi: hi, k_min: k }
}

/// Consumption on periods that are not forced available, scaled so the most
/// robust plan (full power everywhere) can still meet it.
fn random_consumption(r: &mut ChaCha8Rng, ev: &EvParams, grid: &TimeGrid, set: &UncertaintySet) -> Vec<f64> {
    let n = grid.n_periods;
    let mut xi: Vec<f64> = (0..n)
        .map(|t| if !set.alpha_lo[t] && r.gen_bool(0.5) { round_to(r.gen_range(0.0..2.5), 0.01) } else { 0.0 })
        .collect();
    let guaranteed = set.k_min.max(set.forced_ones()) as f64 * ev.energy_per_kw(grid) * ev.max_charge_kw;
    let total: f64 = xi.iter().sum();
    let limit = 0.8 * guaranteed;
    if total > limit {
        let f = if total > 0.0 { limit / total } else { 0.0 };
        for x in &mut xi {
            *x = round_to(*x * f, 1e-4);
        }
        // Rounding may overshoot by a hair; trim the largest entry.
        let excess: f64 = xi.iter().sum::<f64>() - limit;
        if excess > 0.0 {
            let i = (0..n).max_by(|&a, &b| xi[a].total_cmp(&xi[b])).unwrap();
            xi[i] = (xi[i] - excess).max(0.0);
        }
    }
    xi
}

fn random_prices(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| round_to(r.gen_range(0.01..0.3), 0.001)).collect()
}

/// Adversary problems with T in 4..=96 and frequent ties in `c`.
pub fn oracle_case(seed: u64) -> OracleCase {
    let mut r = rng(1, seed);
    let n = r.gen_range(4..=96);
    let ev = random_ev(&mut r, 10.0, (5.0, 40.0));
    let grid = TimeGrid::new(n, 0.25).unwrap();
    let tied = r.gen_bool(0.5);
    let c = (0..n)
        .map(|_| {
            if tied {
                ev.max_charge_kw * r.gen_range(0..=4) as f64 / 4.0
            } else {
                r.gen_range(0.0..=ev.max_charge_kw)
            }
        })
        .collect();
    let set = random_set(&mut r, n);
    OracleCase { c, ev, grid, set }
}

/// A single-vehicle robust instance sharing the grid, vehicle and set of
/// [`oracle_case`] with the same seed, plus random prices and consumption.
pub fn robust_from_oracle_case(seed: u64) -> RobustInstance {
    let case = oracle_case(seed);
    let mut r = rng(2, seed);
    let n = case.grid.n_periods;
    let xi = random_consumption(&mut r, &case.ev, &case.grid, &case.set);
    RobustInstance {
        fleet: vec![case.ev],
        grid: case.grid,
        prices: PriceSeries::new(random_prices(&mut r, n)),
        forecasts: vec![ForecastInputs { alpha_hat: expected_availability(&case.set), xi_hat_kwh: xi }],
        uncertainty: vec![case.set],
        penalty_eur_per_kwh: DEFAULT_PENALTY,
    }
}

fn expected_availability(set: &UncertaintySet) -> Vec<f64> {
    set.alpha_lo
        .iter()
        .zip(&set.alpha_hi)
        .map(|(&lo, &hi)| match (lo, hi) {
            (true, _) => 1.0,
            (false, true) => 0.5,
            (false, false) => 0.0,
        })
        .collect()
}

/// Small single-vehicle instances (T in 3..=8) with tight SOC windows and,
/// in a third of the cases, a low penalty so slacks compete with purchases.
pub fn bilevel_case(seed: u64) -> RobustInstance {
    let mut r = rng(3, seed);
    let n = r.gen_range(3..=8);
    let dt = [0.25, 0.5, 1.0][r.gen_range(0..3)];
    let grid = TimeGrid::new(n, dt).unwrap();
    let ev = random_ev(&mut r, 5.0, (1.0, 12.0));
    let set = random_set(&mut r, n);
    let xi = random_consumption(&mut r, &ev, &grid, &set);
    let penalty = if r.gen_bool(1.0 / 3.0) { round_to(r.gen_range(0.05..2.0), 0.01) } else { DEFAULT_PENALTY };
    RobustInstance {
        fleet: vec![ev],
        grid,
        prices: PriceSeries::new(random_prices(&mut r, n)),
        forecasts: vec![ForecastInputs { alpha_hat: expected_availability(&set), xi_hat_kwh: xi }],
        uncertainty: vec![set],
        penalty_eur_per_kwh: penalty,
    }
}

/// Day-scale fleet: reference vehicles on a commuter pattern. Each vehicle is
/// surely plugged in overnight, surely away in a core window and uncertain on
/// the shoulders; consumption sits in the away window.
pub fn fleet_case(seed: u64, vehicles: usize, periods: usize) -> RobustInstance {
    let mut r = rng(4, seed);
    let grid = TimeGrid::new(periods, 24.0 / periods as f64).unwrap();
    let n = periods;
    let scale = |x: f64| ((x * n as f64).round() as usize).min(n);
    let base: Vec<f64> = (0..n)
        .map(|t| {
            let h = 24.0 * t as f64 / n as f64;
            0.05 + 0.03 * ((h - 4.0) / 24.0 * std::f64::consts::TAU).cos().abs() + 0.04 * ((h - 19.0).abs() < 2.0) as u8 as f64
        })
        .map(|p| round_to(p + r.gen_range(-0.005..0.005), 1e-4))
        .collect();
    let mut fleet = Vec::new();
    let mut forecasts = Vec::new();
    let mut sets = Vec::new();
    for _ in 0..vehicles {
        let ev = EvParams::reference();
        let leave = scale(r.gen_range(0.27..0.36));
        let shoulder_a = scale(r.gen_range(0.02..0.06)).max(1);
        let back = scale(r.gen_range(0.68..0.78));
        let shoulder_b = scale(r.gen_range(0.02..0.08)).max(1);
        let mut lo = vec![false; n];
        let mut hi = vec![false; n];
        for t in 0..n {
            let sure_home = t < leave || t >= (back + shoulder_b).min(n);
            let maybe_home = t < leave + shoulder_a || t >= back;
            lo[t] = sure_home;
            hi[t] = maybe_home;
        }
        let forced = lo.iter().filter(|&&a| a).count();
        let possible = hi.iter().filter(|&&a| a).count();
        let k = forced + r.gen_range(0..=(possible - forced) / 2);
        let set = UncertaintySet { alpha_lo: lo, alpha_hi: hi, k_min: k };
        let away: Vec<usize> = (0..n).filter(|&t| !set.alpha_lo[t]).collect();
        let km = r.gen_range(10.0..70.0);
        let mut xi = vec![0.0; n];
        for &t in &away {
            xi[t] = round_to(km * ev.kwh_per_km / away.len() as f64, 1e-5);
        }
        forecasts.push(ForecastInputs { alpha_hat: expected_availability(&set), xi_hat_kwh: xi });
        sets.push(set);
        fleet.push(ev);
    }
    RobustInstance {
        fleet,
        grid,
        prices: PriceSeries::new(base),
        forecasts,
        uncertainty: sets,
        penalty_eur_per_kwh: DEFAULT_PENALTY,
    }
}

/// Single-vehicle instance whose availability is certain in every period.
pub fn fixed_availability_case(seed: u64) -> RobustInstance {
    let mut r = rng(5, seed);
    let n = r.gen_range(4..=96);
    let grid = TimeGrid::new(n, 0.25).unwrap();
    let ev = random_ev(&mut r, 10.0, (5.0, 40.0));
    let set = UncertaintySet::fixed(&vec![true; n]);
    let mut xi = vec![0.0; n];
    for x in xi.iter_mut() {
        if r.gen_bool(0.3) {
            *x = round_to(r.gen_range(0.0..1.0), 0.01);
        }
    }
    RobustInstance {
        fleet: vec![ev],
        grid,
        prices: PriceSeries::new(random_prices(&mut r, n)),
        forecasts: vec![ForecastInputs { alpha_hat: vec![1.0; n], xi_hat_kwh: xi }],
        uncertainty: vec![set],
        penalty_eur_per_kwh: DEFAULT_PENALTY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn families_are_valid_and_seeded() {
        for seed in 0..20 {
            let a = oracle_case(seed);
            assert!(!a.set.is_empty());
            robust_from_oracle_case(seed).validate().unwrap();
            bilevel_case(seed).validate().unwrap();
            fixed_availability_case(seed).validate().unwrap();
            assert_eq!(bilevel_case(seed), bilevel_case(seed));
        }
        fleet_case(0, 10, 96).validate().unwrap();
    }
}
