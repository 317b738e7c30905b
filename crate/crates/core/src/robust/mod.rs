//! Robust day-ahead scheduling against adversarial availability.
//!
//! Each vehicle's problem is independent, so the fleet model is solved as
//! one single-level MILP per vehicle ([`solve_robust`]) or by constraint
//! generation against the greedy oracle ([`solve_robust_ccg`]).

mod ccg;
mod oracle;
mod single_level;

use serde::{Deserialize, Serialize};

use crate::blocks::gather;
use crate::fleet::{
    validate_fleet, validate_forecasts, EvParams, ForecastInputs, PriceSeries, ScheduleSolution, TimeGrid,
    UncertaintySet,
};
use crate::milp::{solve_milp_with, MilpOptions, MilpStatus};
use crate::par::{default_threads, map_indexed};
use crate::{Error, Result};

pub use ccg::{solve_robust_ccg, solve_robust_ccg_with, CcgOptions, CcgOutcome, CcgStats};
pub use oracle::{coefficients, worst_case_lp, worst_case_oracle, WorstCaseResult};
pub use single_level::{build_single_level, build_single_level_with, linearization_residual, SingleLevelLayout};

/// Real-time and day-ahead imbalance penalty, EUR per kWh.
pub const DEFAULT_PENALTY: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustInstance {
    pub fleet: Vec<EvParams>,
    pub grid: TimeGrid,
    pub prices: PriceSeries,
    pub forecasts: Vec<ForecastInputs>,
    pub uncertainty: Vec<UncertaintySet>,
    pub penalty_eur_per_kwh: f64,
}

impl RobustInstance {
    pub fn num_vehicles(&self) -> usize {
        self.fleet.len()
    }

    /// Checks dimensions, parameters and uncertainty sets.
    pub fn validate(&self) -> Result<()> {
        let mut report = validate_fleet(&self.fleet, &self.grid, &self.uncertainty);
        if self.forecasts.len() != self.fleet.len() {
            report.push(None, format!("{} vehicles but {} forecasts", self.fleet.len(), self.forecasts.len()));
        } else {
            validate_forecasts(&self.forecasts, &self.grid, &mut report);
        }
        if !(self.penalty_eur_per_kwh >= 0.0 && self.penalty_eur_per_kwh.is_finite()) {
            report.push(None, "penalty must be nonnegative");
        }
        report.into_result()?;
        self.prices.check(&self.grid)
    }

    /// The instance restricted to vehicle `v`.
    pub fn single(&self, v: usize) -> RobustInstance {
        RobustInstance {
            fleet: vec![self.fleet[v]],
            grid: self.grid,
            prices: self.prices.clone(),
            forecasts: vec![self.forecasts[v].clone()],
            uncertainty: vec![self.uncertainty[v].clone()],
            penalty_eur_per_kwh: self.penalty_eur_per_kwh,
        }
    }
}

/// Result for one vehicle; rows of a [`ScheduleSolution`].
#[derive(Debug, Clone, PartialEq, Default)]
pub(crate) struct VehiclePlan {
    pub c: Vec<f64>,
    pub z: Vec<f64>,
    pub e: Vec<f64>,
    pub sp: Vec<f64>,
    pub sm: Vec<f64>,
    pub alpha: Vec<bool>,
    pub wc_energy: f64,
    pub zeta: f64,
    pub beta_lo: Vec<f64>,
    pub beta_hi: Vec<f64>,
    pub objective: f64,
}

pub(crate) fn assemble(plans: Vec<VehiclePlan>) -> ScheduleSolution {
    let mut s = ScheduleSolution::default();
    for p in plans {
        s.objective_eur += p.objective;
        s.charge_kw.push(p.c);
        s.linear_charge_kw.push(p.z);
        s.soc_kwh.push(p.e);
        s.slack_pos_kwh.push(p.sp);
        s.slack_neg_kwh.push(p.sm);
        s.wc_alpha.push(p.alpha);
        s.wc_energy_kwh.push(p.wc_energy);
        s.dual_k.push(p.zeta);
        s.dual_lo.push(p.beta_lo);
        s.dual_hi.push(p.beta_hi);
    }
    s
}

#[derive(Debug, Clone)]
pub struct RobustOptions {
    pub milp: MilpOptions,
    pub threads: usize,
    /// Big-M override; `None` uses `C̄_v`.
    pub big_m: Option<f64>,
}

impl Default for RobustOptions {
    fn default() -> Self {
        RobustOptions { milp: MilpOptions::default(), threads: default_threads(), big_m: None }
    }
}

/// Search statistics of one vehicle MILP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleStats {
    pub nodes: usize,
    pub lp_iterations: usize,
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct RobustOutcome {
    pub schedule: ScheduleSolution,
    pub stats: Vec<VehicleStats>,
    /// Largest `|z - cα|` over vehicles and periods.
    pub linearization_residual: f64,
    /// Largest strong-duality residual over vehicles.
    pub duality_residual: f64,
}

/// Solves the robust model to optimality with default options.
pub fn solve_robust(inst: &RobustInstance) -> Result<ScheduleSolution> {
    Ok(solve_robust_with(inst, &RobustOptions::default())?.schedule)
}

pub fn solve_robust_with(inst: &RobustInstance, opts: &RobustOptions) -> Result<RobustOutcome> {
    inst.validate()?;
    let results = map_indexed(inst.num_vehicles(), opts.threads, |v| {
        solve_vehicle(inst, v, opts).map_err(|e| e.for_vehicle(v))
    });
    let mut plans = Vec::with_capacity(results.len());
    let mut stats = Vec::with_capacity(results.len());
    let mut lin: f64 = 0.0;
    let mut dual: f64 = 0.0;
    for r in results {
        let (plan, st, l, d) = r?;
        plans.push(plan);
        stats.push(st);
        lin = lin.max(l);
        dual = dual.max(d);
    }
    Ok(RobustOutcome { schedule: assemble(plans), stats, linearization_residual: lin, duality_residual: dual })
}

fn solve_vehicle(inst: &RobustInstance, v: usize, opts: &RobustOptions) -> Result<(VehiclePlan, VehicleStats, f64, f64)> {
    let single = inst.single(v);
    let (milp, layout) = build_single_level_with(&single, 0, opts.big_m)?;
    let sol = solve_milp_with(&milp, &opts.milp)?;
    match sol.status {
        MilpStatus::Optimal => {}
        MilpStatus::NodeLimit if sol.has_incumbent() => {}
        MilpStatus::NodeLimit => return Err(Error::Infeasible("node limit reached without an incumbent".into())),
        MilpStatus::Infeasible => return Err(Error::Infeasible("robust model has no feasible schedule".into())),
        MilpStatus::Unbounded => return Err(Error::Numerical("robust model reported unbounded".into())),
    }
    let x = &sol.x;
    let u = &inst.uncertainty[v];
    let k = inst.fleet[v].energy_per_kw(&inst.grid);
    let z = gather(x, &layout.z);
    let beta_lo = gather(x, &layout.beta_lo);
    let beta_hi = gather(x, &layout.beta_hi);
    let zeta = x[layout.zeta];
    let primal: f64 = z.iter().map(|v| k * v).sum();
    let duality = (oracle::dual_objective(u, zeta, &beta_lo, &beta_hi) - primal).abs();
    let lin = linearization_residual(x, &layout);
    let plan = VehiclePlan {
        c: gather(x, &layout.c),
        z,
        e: gather(x, &layout.e),
        sp: gather(x, &layout.s_plus),
        sm: gather(x, &layout.s_minus),
        alpha: layout.alpha.iter().map(|&j| x[j] > 0.5).collect(),
        wc_energy: primal,
        zeta,
        beta_lo,
        beta_hi,
        objective: sol.objective,
    };
    Ok((plan, VehicleStats { nodes: sol.nodes, lp_iterations: sol.lp_iterations, gap: sol.gap }, lin, duality))
}

/// Cost of a plan: `Σ λ c Δt + P Σ (s⁺ + s⁻)`.
pub(crate) fn plan_cost(inst: &RobustInstance, c: &[f64], sp: &[f64], sm: &[f64]) -> f64 {
    let dt = inst.grid.dt_hours;
    let energy: f64 = c.iter().zip(&inst.prices.eur_per_kwh).map(|(c, l)| l * c * dt).sum();
    let slack: f64 = sp.iter().chain(sm).sum();
    energy + inst.penalty_eur_per_kwh * slack
}
