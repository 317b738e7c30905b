//! Constraint generation against the greedy oracle.
//!
//! Per vehicle, a master MILP picks a charging plan `c` together with a
//! delivery pattern `δ` in the uncertainty set, linearizes `z = c δ`, feeds
//! `z` into the battery balance and requires `Σ Δtη z ≥ Σ ξ̂`. For every
//! pattern `q` returned by the oracle so far it also requires
//! `Σ Δtη z ≤ Σ Δtη c q`, so `δ` must be at least as bad for the fleet as
//! each known pattern. Without all patterns the master is a relaxation of the
//! robust model. A threshold `ζ` with `Δtη z_t ≤ ζ` on kept uncertain periods
//! and `Δtη c_t ≥ ζ` on dropped ones tightens it; every worst-case pattern
//! admits one.
//!
//! Each pattern bounds the adversary's value from one side only, and sets
//! with many uncertain periods have too many patterns to list. Once the
//! pattern budget is spent, the master receives the adversary's LP dual at
//! the threshold, `Σ Δtη z ≤ mζ + Σ μ_t` with `μ_t ≤ min(0, Δtη c_t − ζ)`,
//! which stands for all remaining patterns at once.
//!
//! The patterns are generated lazily inside one branch-and-bound tree. At
//! every node the oracle evaluates the relaxation's `c`; when the node
//! delivers more than the adversary would allow, the oracle's pattern is
//! violated and becomes a new row, so no pattern is generated twice.
//! Integral candidates are only accepted once their `δ` is a worst case for
//! their own `c`. Each new pattern also yields a robust-feasible plan by
//! pinning `δ` to it (see [`pinned_lp`]), which seeds the incumbent.

use serde::{Deserialize, Serialize};

use crate::blocks::{add_balance_rows, add_charge_vars, add_soc_vars, gather, Names, SocVars};
use crate::lp::{solve_lp_with, LpProblem, LpStatus, Relation, SolverOptions};
use crate::milp::{solve_milp_lazy, Cut, MilpOptions, MilpProblem, MilpStatus, Separation};
use crate::par::{default_threads, map_indexed};
use crate::{Error, Result};

use super::oracle::{worst_case_oracle, WorstCaseResult};
use super::{assemble, plan_cost, RobustInstance, VehiclePlan};
use crate::fleet::ScheduleSolution;

#[derive(Debug, Clone)]
pub struct CcgOptions {
    /// Absolute tolerance, in kWh, on the worst-case energy check.
    pub tol: f64,
    /// Patterns generated per vehicle before the master switches to the
    /// adversary's dual; `None` means twice the number of periods.
    pub pattern_budget: Option<usize>,
    /// Hard cap on iterations per vehicle; exceeding it is an error.
    pub max_iterations: Option<usize>,
    pub threads: usize,
    pub lp: SolverOptions,
}

impl Default for CcgOptions {
    fn default() -> Self {
        CcgOptions { tol: 1e-7, pattern_budget: None, max_iterations: None, threads: default_threads(), lp: SolverOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CcgStats {
    pub iterations: usize,
    /// Whether the master needed the adversary's dual.
    pub dual_rows: bool,
    pub nodes: usize,
    pub lp_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct CcgOutcome {
    pub schedule: ScheduleSolution,
    pub stats: Vec<CcgStats>,
}

pub fn solve_robust_ccg(inst: &RobustInstance, tol: f64) -> Result<ScheduleSolution> {
    Ok(solve_robust_ccg_with(inst, &CcgOptions { tol, ..Default::default() })?.schedule)
}

pub fn solve_robust_ccg_with(inst: &RobustInstance, opts: &CcgOptions) -> Result<CcgOutcome> {
    inst.validate()?;
    let results = map_indexed(inst.num_vehicles(), opts.threads, |v| {
        ccg_vehicle(inst, v, opts).map_err(|e| e.for_vehicle(v))
    });
    let mut plans = Vec::new();
    let mut stats = Vec::new();
    for r in results {
        let (p, s) = r?;
        plans.push(p);
        stats.push(s);
    }
    Ok(CcgOutcome { schedule: assemble(plans), stats })
}

struct MasterLayout {
    c: Vec<usize>,
    soc: SocVars,
    z: Vec<usize>,
    delta: Vec<usize>,
    zeta: usize,
    /// Uncertain periods and their `μ` columns, unused until the dual rows arrive.
    free: Vec<usize>,
    mu: Vec<usize>,
    extra: usize,
}

fn build_master(inst: &RobustInstance, v: usize) -> (MilpProblem, MasterLayout) {
    let ev = &inst.fleet[v];
    let grid = &inst.grid;
    let u = &inst.uncertainty[v];
    let fc = &inst.forecasts[v];
    let n = grid.n_periods;
    let k = ev.energy_per_kw(grid);
    let m = ev.max_charge_kw;
    let names = Names::single();
    let mut lp = LpProblem::new();
    let c = add_charge_vars(&mut lp, &names, grid, &inst.prices.eur_per_kwh, |_| m);
    let soc = add_soc_vars(&mut lp, &names, ev, grid, inst.penalty_eur_per_kwh);
    let z: Vec<usize> = (0..n).map(|t| lp.add_var(names.name("z", t), 0.0, 0.0, f64::INFINITY)).collect();
    let delta: Vec<usize> = (0..n)
        .map(|t| {
            let lo = if u.alpha_lo[t] { 1.0 } else { 0.0 };
            let hi = if u.alpha_hi[t] { 1.0 } else { 0.0 };
            lp.add_var(names.name("d", t), 0.0, lo, hi)
        })
        .collect();
    let zeta = lp.add_var("zeta", 0.0, 0.0, k * m);
    let free: Vec<usize> = (0..n).filter(|&t| u.alpha_hi[t] && !u.alpha_lo[t]).collect();
    let mu: Vec<usize> = free.iter().map(|&t| lp.add_var(names.name("mu", t), 0.0, -k * m, 0.0)).collect();
    let extra = super::oracle::extra_needed(u);
    add_balance_rows(&mut lp, &names, ev, grid, &soc, &z, |_| 1.0, &fc.xi_hat_kwh);
    for &t in &free {
        lp.add_row(names.name("kz", t), [(z[t], k), (zeta, -1.0)], Relation::Le, 0.0);
        lp.add_row(names.name("kc", t), [(zeta, 1.0), (c[t], -k), (delta[t], -k * m)], Relation::Le, 0.0);
    }
    for t in 0..n {
        lp.add_row(names.name("lz", t), [(c[t], 1.0), (z[t], -1.0)], Relation::Ge, 0.0);
        lp.add_row(names.name("uz", t), [(c[t], 1.0), (z[t], -1.0), (delta[t], m)], Relation::Le, m);
        lp.add_row(names.name("zd", t), [(z[t], 1.0), (delta[t], -m)], Relation::Le, 0.0);
    }
    lp.add_row("card", delta.iter().map(|&j| (j, 1.0)), Relation::Ge, u.k_min as f64);
    // A worst case never needs more uncertain periods than the floor forces.
    lp.add_row("mfree", free.iter().map(|&t| (delta[t], 1.0)), Relation::Le, extra as f64);
    lp.add_row("rdemand", z.iter().map(|&j| (j, k)), Relation::Ge, fc.total_consumption());
    (MilpProblem::new(lp, delta.clone()), MasterLayout { c, soc, z, delta, zeta, free, mu, extra })
}

/// `Σ Δtη z ≤ Σ Δtη c q`: the master's pattern is no better for the fleet than `q`.
fn pattern_cut(layout: &MasterLayout, k: f64, q: &[bool]) -> Cut {
    let coeffs = layout
        .z
        .iter()
        .map(|&j| (j, k))
        .chain((0..q.len()).filter(|&t| q[t]).map(|t| (layout.c[t], -k)))
        .collect();
    Cut { coeffs, relation: Relation::Le, rhs: 0.0 }
}

/// `μ_i ≤ Δtη c_t − ζ` per uncertain period and `Σ Δtη z ≤ mζ + Σ μ` over them.
fn dual_cuts(layout: &MasterLayout, k: f64) -> Vec<Cut> {
    let mut cuts: Vec<Cut> = layout
        .free
        .iter()
        .zip(&layout.mu)
        .map(|(&t, &mu)| Cut {
            coeffs: vec![(mu, 1.0), (layout.c[t], -k), (layout.zeta, 1.0)],
            relation: Relation::Le,
            rhs: 0.0,
        })
        .collect();
    let coeffs = layout
        .free
        .iter()
        .map(|&t| (layout.z[t], k))
        .chain([(layout.zeta, -(layout.extra as f64))])
        .chain(layout.mu.iter().map(|&j| (j, -1.0)))
        .collect();
    cuts.push(Cut { coeffs, relation: Relation::Le, rhs: 0.0 });
    cuts
}

/// The master with `δ` pinned to `q`. The threshold rows keep `q` a worst
/// case for the plan, so the optimum is feasible for the robust model and for
/// every later master.
fn pinned_lp(master: &MilpProblem, layout: &MasterLayout, q: &[bool]) -> LpProblem {
    let mut lp = master.lp.clone();
    for (t, &j) in layout.delta.iter().enumerate() {
        let b = if q[t] { 1.0 } else { 0.0 };
        lp.lower[j] = b;
        lp.upper[j] = b;
    }
    lp
}

fn ccg_vehicle(inst: &RobustInstance, v: usize, opts: &CcgOptions) -> Result<(VehiclePlan, CcgStats)> {
    let ev = &inst.fleet[v];
    let grid = &inst.grid;
    let u = &inst.uncertainty[v];
    let k = ev.energy_per_kw(grid);
    let budget = opts.pattern_budget.unwrap_or(2 * grid.n_periods);
    let cap = opts.max_iterations.unwrap_or(usize::MAX);
    let milp_opts = MilpOptions { lp: opts.lp.clone(), ..Default::default() };

    let (master, layout) = build_master(inst, v);
    let mut rounds = 0usize;
    let mut pinned_iterations = 0usize;
    let mut best_pinned = f64::INFINITY;
    let mut dual_rows = false;
    let separate = |x: &[f64], integral: bool| -> Result<Separation> {
        let c = gather(x, &layout.c);
        let delivered: f64 = layout.z.iter().map(|&j| k * x[j]).sum();
        let wc = worst_case_oracle(&c, ev, grid, u)?;
        // Fractional nodes are only cut when the violation is clear.
        let slack = if integral { opts.tol } else { 1e-6_f64.max(opts.tol) };
        if delivered <= wc.energy_kwh + slack {
            return Ok(Separation::Accept);
        }
        rounds += 1;
        if rounds > cap {
            return Err(Error::CcgIterationLimit { iterations: cap, best_objective: best_pinned });
        }
        let mut cuts = vec![pattern_cut(&layout, k, &wc.alpha)];
        if rounds > budget && !dual_rows {
            dual_rows = true;
            cuts.extend(dual_cuts(&layout, k));
        }
        let pinned = solve_lp_with(&pinned_lp(&master, &layout, &wc.alpha), &opts.lp)?;
        pinned_iterations += pinned.iterations;
        let heuristic = (pinned.status == LpStatus::Optimal).then(|| {
            best_pinned = best_pinned.min(pinned.objective);
            let mut x = pinned.x;
            for (&t, &mu) in layout.free.iter().zip(&layout.mu) {
                x[mu] = (k * x[layout.c[t]] - x[layout.zeta]).min(0.0);
            }
            x
        });
        Ok(Separation::Reject { cuts, heuristic })
    };
    let (sol, _) = solve_milp_lazy(&master, &milp_opts, None, separate)?;
    match sol.status {
        MilpStatus::Optimal => {}
        MilpStatus::Infeasible => {
            return Err(Error::Infeasible("robust demand cannot be met by any charging plan".into()))
        }
        MilpStatus::NodeLimit => return Err(Error::Numerical("master MILP hit its node limit".into())),
        MilpStatus::Unbounded => return Err(Error::Numerical("master MILP reported unbounded".into())),
    }
    let wc = worst_case_oracle(&gather(&sol.x, &layout.c), ev, grid, u)?;
    let stats = CcgStats {
        iterations: rounds + 1,
        dual_rows,
        nodes: sol.nodes,
        lp_iterations: sol.lp_iterations + pinned_iterations,
    };
    Ok((plan_from(inst, &layout, &sol.x, k, wc), stats))
}

fn plan_from(inst: &RobustInstance, layout: &MasterLayout, x: &[f64], k: f64, wc: WorstCaseResult) -> VehiclePlan {
    let c = gather(x, &layout.c);
    let z = gather(x, &layout.z);
    let sp = gather(x, &layout.soc.sp);
    let sm = gather(x, &layout.soc.sm);
    VehiclePlan {
        objective: plan_cost(inst, &c, &sp, &sm),
        wc_energy: z.iter().map(|z| k * z).sum(),
        alpha: layout.delta.iter().map(|&j| x[j] > 0.5).collect(),
        e: gather(x, &layout.soc.e),
        c,
        z,
        sp,
        sm,
        zeta: wc.dual_k,
        beta_lo: wc.dual_lo,
        beta_hi: wc.dual_hi,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fleet::{EvParams, ForecastInputs, PriceSeries, TimeGrid, UncertaintySet};

    #[test]
    fn cheap_uncertain_period_is_not_trusted() {
        // Period 1 is cheap but may be missing; the floor K = 1 lets the
        // adversary drop it, so the demand must be bought in period 2.
        let ev = EvParams {
            max_charge_kw: 4.0,
            efficiency: 1.0,
            e_min_kwh: 0.0,
            e_max_kwh: 10.0,
            e_init_kwh: 5.0,
            kwh_per_km: 0.137,
        };
        let inst = RobustInstance {
            fleet: vec![ev],
            grid: TimeGrid::new(3, 1.0).unwrap(),
            prices: PriceSeries::new(vec![0.05, 0.2, 0.3]),
            forecasts: vec![ForecastInputs { alpha_hat: vec![0.5, 1.0, 0.0], xi_hat_kwh: vec![0.0, 0.0, 2.0] }],
            uncertainty: vec![UncertaintySet {
                alpha_lo: vec![false, true, false],
                alpha_hi: vec![true, true, false],
                k_min: 1,
            }],
            penalty_eur_per_kwh: 1000.0,
        };
        let out = solve_robust_ccg_with(&inst, &CcgOptions { threads: 1, ..Default::default() }).unwrap();
        let s = &out.schedule;
        assert!((s.charge_kw[0][1] - 2.0).abs() < 1e-7, "{:?}", s.charge_kw);
        assert!(s.charge_kw[0][0].abs() < 1e-7);
        assert!((s.objective_eur - 0.4).abs() < 1e-9);
        assert!(s.wc_energy_kwh[0] >= 2.0 - 1e-7);
    }
}
