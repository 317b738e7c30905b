//! Real-time validation of a day-ahead purchase.
//!
//! The aggregate purchase `Σ_v c_{v,t}` is fixed. Once availability and
//! consumption are revealed, the purchased power is re-allocated to the
//! vehicles that are actually plugged in (unused power is curtailed) so as to
//! minimize the penalized battery-balance deviations.

mod month;

use serde::{Deserialize, Serialize};

use crate::blocks::{add_balance_rows, add_soc_vars, gather, Names};
use crate::fleet::{DayRecord, ScheduleSolution};
use crate::lp::{solve_lp_hinted, LpProblem, LpStatus, Relation, SolverOptions};
use crate::robust::RobustInstance;
use crate::{Error, Result};

pub use month::{
    evaluate_day, evaluate_month, Aggregate, DayEvaluation, DayResult, Method, MethodSelector, MethodSummary, MonthConfig,
    MonthReport,
};

/// Residual allowed on the purchase cap and on nonnegativity.
pub const CAP_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealtimeOutcome {
    /// `a_{v,t}` in kW.
    pub allocation_kw: Vec<Vec<f64>>,
    pub soc_kwh: Vec<Vec<f64>>,
    pub slack_pos_kwh: Vec<Vec<f64>>,
    pub slack_neg_kwh: Vec<Vec<f64>>,
    /// `Σ_t (s⁺ + s⁻)` per vehicle.
    pub deviation_kwh: Vec<f64>,
    pub d_rt_kwh: f64,
    pub penalty_cost_eur: f64,
}

impl RealtimeOutcome {
    /// Largest excess of the allocation over the purchase, and largest
    /// negative allocation, given the purchased power per period.
    pub fn cap_residual(&self, purchased_kw: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (t, &p) in purchased_kw.iter().enumerate() {
            let used: f64 = self.allocation_kw.iter().map(|a| a[t]).sum();
            worst = worst.max(used - p);
        }
        for a in self.allocation_kw.iter().flatten() {
            worst = worst.max(-a);
        }
        worst
    }
}

/// Day metrics: `C^DA = Σ λ c Δt`, `P^DA = Σ c` and `D^RT`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayMetrics {
    pub c_da_eur: f64,
    pub p_da_kw: f64,
    pub d_rt_kwh: f64,
}

impl DayMetrics {
    pub fn new(schedule: &ScheduleSolution, inst: &RobustInstance, outcome: &RealtimeOutcome) -> Self {
        let lambda = &inst.prices.eur_per_kwh;
        let dt = inst.grid.dt_hours;
        let mut c_da = 0.0;
        let mut p_da = 0.0;
        for row in &schedule.charge_kw {
            for (t, &c) in row.iter().enumerate() {
                c_da += lambda[t] * c * dt;
                p_da += c;
            }
        }
        DayMetrics { c_da_eur: c_da, p_da_kw: p_da, d_rt_kwh: outcome.d_rt_kwh }
    }
}

/// Re-dispatches `schedule`'s aggregate purchase against the realized day.
/// The penalty and vehicle data come from `inst`.
pub fn simulate_realtime(schedule: &ScheduleSolution, realized: &DayRecord, inst: &RobustInstance) -> Result<RealtimeOutcome> {
    simulate_realtime_with(schedule, realized, inst, &SolverOptions::default())
}

pub fn simulate_realtime_with(
    schedule: &ScheduleSolution,
    realized: &DayRecord,
    inst: &RobustInstance,
    opts: &SolverOptions,
) -> Result<RealtimeOutcome> {
    let n_v = inst.num_vehicles();
    let grid = &inst.grid;
    let n = grid.n_periods;
    realized.check(n_v, grid)?;
    if schedule.num_vehicles() != n_v || schedule.charge_kw.iter().any(|r| r.len() != n) {
        return Err(Error::Validation(format!(
            "schedule has {} vehicles, instance {n_v} with {n} periods",
            schedule.num_vehicles()
        )));
    }
    let purchased = schedule.purchased_kw();
    let mut lp = LpProblem::new();
    let mut alloc = Vec::with_capacity(n_v);
    let mut socs = Vec::with_capacity(n_v);
    let mut hint = Vec::with_capacity(n_v * n);
    for v in 0..n_v {
        let ev = &inst.fleet[v];
        let names = if n_v == 1 { Names::single() } else { Names::vehicle(v) };
        let a: Vec<usize> = (0..n)
            .map(|t| {
                let cap = if realized.realized_alpha[v][t] { ev.max_charge_kw } else { 0.0 };
                lp.add_var(names.name("a", t), 0.0, 0.0, cap)
            })
            .collect();
        let soc = add_soc_vars(&mut lp, &names, ev, grid, inst.penalty_eur_per_kwh);
        let rows = add_balance_rows(&mut lp, &names, ev, grid, &soc, &a, |_| 1.0, &realized.realized_xi_kwh[v]);
        hint.extend(rows.into_iter().zip(soc.e.iter().copied()));
        alloc.push(a);
        socs.push(soc);
    }
    for t in 0..n {
        lp.add_row(format!("cap{}", t + 1), alloc.iter().map(|a| (a[t], 1.0)), Relation::Le, purchased[t]);
    }
    let sol = solve_lp_hinted(&lp, opts, &hint)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Numerical(format!("real-time LP ended {:?}", sol.status)));
    }
    let mut out = RealtimeOutcome {
        allocation_kw: Vec::with_capacity(n_v),
        soc_kwh: Vec::with_capacity(n_v),
        slack_pos_kwh: Vec::with_capacity(n_v),
        slack_neg_kwh: Vec::with_capacity(n_v),
        deviation_kwh: Vec::with_capacity(n_v),
        d_rt_kwh: 0.0,
        penalty_cost_eur: 0.0,
    };
    for v in 0..n_v {
        let sp = gather(&sol.x, &socs[v].sp);
        let sm = gather(&sol.x, &socs[v].sm);
        let dev: f64 = sp.iter().chain(&sm).sum();
        out.d_rt_kwh += dev;
        out.deviation_kwh.push(dev);
        out.allocation_kw.push(gather(&sol.x, &alloc[v]).into_iter().map(|a| a.max(0.0)).collect());
        out.soc_kwh.push(gather(&sol.x, &socs[v].e));
        out.slack_pos_kwh.push(sp);
        out.slack_neg_kwh.push(sm);
    }
    out.penalty_cost_eur = inst.penalty_eur_per_kwh * out.d_rt_kwh;
    Ok(out)
}
