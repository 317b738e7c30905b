//! Expected-value baseline: availability enters only through the charge cap
//! `c ≤ C̄ α̂`, consumption through the forecast `ξ̂`.

use crate::blocks::{add_balance_rows, add_charge_vars, add_soc_vars, gather, Names};
use crate::lp::{solve_lp_with, LpProblem, LpStatus, SolverOptions};
use crate::par::{default_threads, map_indexed};
use crate::robust::{RobustInstance, VehiclePlan};
use crate::{Error, Result};
use crate::fleet::ScheduleSolution;

struct Layout {
    c: Vec<usize>,
    e: Vec<usize>,
    sp: Vec<usize>,
    sm: Vec<usize>,
}

fn add_vehicle(lp: &mut LpProblem, inst: &RobustInstance, v: usize, names: &Names) -> Layout {
    let ev = &inst.fleet[v];
    let fc = &inst.forecasts[v];
    let c = add_charge_vars(lp, names, &inst.grid, &inst.prices.eur_per_kwh, |t| {
        ev.max_charge_kw * fc.alpha_hat[t]
    });
    let soc = add_soc_vars(lp, names, ev, &inst.grid, inst.penalty_eur_per_kwh);
    add_balance_rows(lp, names, ev, &inst.grid, &soc, &c, |_| 1.0, &fc.xi_hat_kwh);
    Layout { c, e: soc.e, sp: soc.sp, sm: soc.sm }
}

/// The whole-fleet LP. Vehicle blocks share no rows; [`solve_deterministic`]
/// solves them separately.
pub fn build_deterministic(inst: &RobustInstance) -> Result<LpProblem> {
    inst.validate()?;
    let mut lp = LpProblem::new();
    let single = inst.num_vehicles() == 1;
    for v in 0..inst.num_vehicles() {
        let names = if single { Names::single() } else { Names::vehicle(v) };
        add_vehicle(&mut lp, inst, v, &names);
    }
    Ok(lp)
}

pub fn solve_deterministic(inst: &RobustInstance) -> Result<ScheduleSolution> {
    solve_deterministic_with(inst, default_threads(), &SolverOptions::default())
}

pub fn solve_deterministic_with(inst: &RobustInstance, threads: usize, opts: &SolverOptions) -> Result<ScheduleSolution> {
    inst.validate()?;
    let results = map_indexed(inst.num_vehicles(), threads, |v| solve_vehicle(inst, v, opts).map_err(|e| e.for_vehicle(v)));
    Ok(crate::robust::assemble(results.into_iter().collect::<Result<Vec<_>>>()?))
}

fn solve_vehicle(inst: &RobustInstance, v: usize, opts: &SolverOptions) -> Result<VehiclePlan> {
    let mut lp = LpProblem::new();
    let layout = add_vehicle(&mut lp, inst, v, &Names::single());
    let sol = solve_lp_with(&lp, opts)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Numerical(format!("deterministic LP ended {:?}", sol.status)));
    }
    let n = inst.grid.n_periods;
    let c = gather(&sol.x, &layout.c);
    Ok(VehiclePlan {
        z: c.clone(),
        c,
        e: gather(&sol.x, &layout.e),
        sp: gather(&sol.x, &layout.sp),
        sm: gather(&sol.x, &layout.sm),
        alpha: vec![false; n],
        wc_energy: inst.forecasts[v].total_consumption(),
        zeta: 0.0,
        beta_lo: vec![0.0; n],
        beta_hi: vec![0.0; n],
        objective: sol.objective,
    })
}
