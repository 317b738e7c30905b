//! Building blocks shared by the day-ahead and real-time models: per-vehicle
//! state-of-charge variables, slacks and the battery balance rows.

use crate::fleet::{EvParams, TimeGrid};
use crate::lp::{LpProblem, Relation};

/// Produces variable and row names for one vehicle block. Names stay within
/// eight characters for single-vehicle models so MPS output keeps them.
#[derive(Debug, Clone)]
pub(crate) struct Names {
    suffix: Option<usize>,
}

impl Names {
    pub fn single() -> Self {
        Names { suffix: None }
    }

    pub fn vehicle(v: usize) -> Self {
        Names { suffix: Some(v + 1) }
    }

    pub fn name(&self, stem: &str, t: usize) -> String {
        match self.suffix {
            None => format!("{stem}{}", t + 1),
            Some(v) => format!("{stem}{v}_{}", t + 1),
        }
    }
}

/// Indices of the SOC path and slack variables of one vehicle.
#[derive(Debug, Clone)]
pub(crate) struct SocVars {
    pub e: Vec<usize>,
    pub sp: Vec<usize>,
    pub sm: Vec<usize>,
}

/// Adds charge variables `c_t` in `[0, cap_t]` priced at `λ_t Δt`.
pub(crate) fn add_charge_vars(
    lp: &mut LpProblem,
    names: &Names,
    grid: &TimeGrid,
    prices: &[f64],
    caps: impl Fn(usize) -> f64,
) -> Vec<usize> {
    (0..grid.n_periods)
        .map(|t| lp.add_var(names.name("c", t), prices[t] * grid.dt_hours, 0.0, caps(t)))
        .collect()
}

/// Adds `e_t` in the SOC window (the last one pinned to `e_0`) and slacks
/// priced at `penalty`.
pub(crate) fn add_soc_vars(lp: &mut LpProblem, names: &Names, ev: &EvParams, grid: &TimeGrid, penalty: f64) -> SocVars {
    let n = grid.n_periods;
    let e = (0..n)
        .map(|t| {
            let (lo, hi) = if t + 1 == n {
                (ev.e_init_kwh, ev.e_init_kwh)
            } else {
                (ev.e_min_kwh, ev.e_max_kwh)
            };
            lp.add_var(names.name("e", t), 0.0, lo, hi)
        })
        .collect();
    let sp = (0..n).map(|t| lp.add_var(names.name("sp", t), penalty, 0.0, f64::INFINITY)).collect();
    let sm = (0..n).map(|t| lp.add_var(names.name("sm", t), penalty, 0.0, f64::INFINITY)).collect();
    SocVars { e, sp, sm }
}

/// Adds `e_t - e_{t-1} - g_t Δtη d_t - s⁺_t + s⁻_t = -ξ_t` where `d` is the
/// energy-delivering variable of each period and `g_t` its gain (1 unless a
/// fixed availability pattern scales it). Returns the row indices.
#[allow(clippy::too_many_arguments)]
pub(crate) fn add_balance_rows(
    lp: &mut LpProblem,
    names: &Names,
    ev: &EvParams,
    grid: &TimeGrid,
    soc: &SocVars,
    delivered: &[usize],
    gain: impl Fn(usize) -> f64,
    xi: &[f64],
) -> Vec<usize> {
    let k = ev.energy_per_kw(grid);
    (0..grid.n_periods)
        .map(|t| {
            let mut coeffs = vec![(soc.e[t], 1.0), (delivered[t], -k * gain(t)), (soc.sp[t], -1.0), (soc.sm[t], 1.0)];
            let mut rhs = -xi[t];
            if t == 0 {
                rhs += ev.e_init_kwh;
            } else {
                coeffs.push((soc.e[t - 1], -1.0));
            }
            lp.add_row(names.name("b", t), coeffs, Relation::Eq, rhs)
        })
        .collect()
}

/// Values of `idx` in `x`.
pub(crate) fn gather(x: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&j| x[j]).collect()
}
