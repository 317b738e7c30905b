//! Single-level reformulation of one vehicle's bilevel problem.
//!
//! The adversary is replaced by its primal feasibility (cardinality row and
//! box bounds on α), dual feasibility and the strong-duality equality. The
//! products `c_t α_t` become `z_t` through big-M rows with `M = C̄`.
//!
//! Complementary slackness adds two valid rows per uncertain period: a period
//! the adversary keeps delivers at most `ζ`, one it drops costs at least `ζ`.
//! Both only tighten the relaxation.

use crate::blocks::{add_balance_rows, add_charge_vars, add_soc_vars, Names, SocVars};
use crate::lp::{LpProblem, Relation};
use crate::milp::MilpProblem;
use crate::Result;

use super::RobustInstance;

/// Variable and row indices of a single-vehicle model.
#[derive(Debug, Clone)]
pub struct SingleLevelLayout {
    pub c: Vec<usize>,
    pub e: Vec<usize>,
    pub s_plus: Vec<usize>,
    pub s_minus: Vec<usize>,
    pub z: Vec<usize>,
    pub alpha: Vec<usize>,
    pub beta_lo: Vec<usize>,
    pub beta_hi: Vec<usize>,
    pub zeta: usize,
    pub balance_rows: Vec<usize>,
    pub strong_duality_row: usize,
}

/// Builds the MILP for vehicle `v` with `M = C̄_v`.
pub fn build_single_level(inst: &RobustInstance, v: usize) -> Result<MilpProblem> {
    Ok(build_single_level_with(inst, v, None)?.0)
}

/// As [`build_single_level`], with an optional big-M override (used to
/// demonstrate that an undersized M breaks the linearization).
pub fn build_single_level_with(
    inst: &RobustInstance,
    v: usize,
    big_m: Option<f64>,
) -> Result<(MilpProblem, SingleLevelLayout)> {
    inst.validate()?;
    let ev = &inst.fleet[v];
    let grid = &inst.grid;
    let u = &inst.uncertainty[v];
    let fc = &inst.forecasts[v];
    let n = grid.n_periods;
    let k = ev.energy_per_kw(grid);
    let m = big_m.unwrap_or(ev.max_charge_kw);
    let names = Names::single();
    let mut lp = LpProblem::new();

    let c = add_charge_vars(&mut lp, &names, grid, &inst.prices.eur_per_kwh, |_| ev.max_charge_kw);
    let SocVars { e, sp, sm } = add_soc_vars(&mut lp, &names, ev, grid, inst.penalty_eur_per_kwh);
    let z: Vec<usize> = (0..n).map(|t| lp.add_var(names.name("z", t), 0.0, 0.0, f64::INFINITY)).collect();
    let alpha: Vec<usize> = (0..n)
        .map(|t| {
            let lo = if u.alpha_lo[t] { 1.0 } else { 0.0 };
            let hi = if u.alpha_hi[t] { 1.0 } else { 0.0 };
            lp.add_var(names.name("a", t), 0.0, lo, hi)
        })
        .collect();
    let beta_lo: Vec<usize> = (0..n).map(|t| lp.add_var(names.name("bl", t), 0.0, 0.0, f64::INFINITY)).collect();
    let beta_hi: Vec<usize> =
        (0..n).map(|t| lp.add_var(names.name("bu", t), 0.0, f64::NEG_INFINITY, 0.0)).collect();
    // Some optimal ζ always lies within [0, Δtη C̄].
    let zeta = lp.add_var("zeta", 0.0, 0.0, k * ev.max_charge_kw);

    let soc = SocVars { e: e.clone(), sp: sp.clone(), sm: sm.clone() };
    let balance_rows = add_balance_rows(&mut lp, &names, ev, grid, &soc, &z, |_| 1.0, &fc.xi_hat_kwh);

    for t in 0..n {
        // Dual feasibility: ζ + β̲_t + β̄_t ≤ Δtη c_t.
        lp.add_row(
            names.name("df", t),
            [(zeta, 1.0), (beta_lo[t], 1.0), (beta_hi[t], 1.0), (c[t], -k)],
            Relation::Le,
            0.0,
        );
    }
    for t in 0..n {
        lp.add_row(names.name("lz", t), [(c[t], 1.0), (z[t], -1.0)], Relation::Ge, 0.0);
    }
    for t in 0..n {
        lp.add_row(names.name("uz", t), [(c[t], 1.0), (z[t], -1.0), (alpha[t], m)], Relation::Le, m);
    }
    for t in 0..n {
        lp.add_row(names.name("za", t), [(z[t], 1.0), (alpha[t], -m)], Relation::Le, 0.0);
    }
    for t in (0..n).filter(|&t| u.alpha_hi[t] && !u.alpha_lo[t]) {
        lp.add_row(names.name("kz", t), [(z[t], k), (zeta, -1.0)], Relation::Le, 0.0);
        lp.add_row(names.name("kc", t), [(zeta, 1.0), (c[t], -k), (alpha[t], -k * m)], Relation::Le, 0.0);
    }

    let dual_obj = || {
        let mut terms = vec![(zeta, u.k_min as f64)];
        for t in 0..n {
            if u.alpha_lo[t] {
                terms.push((beta_lo[t], 1.0));
            }
            if u.alpha_hi[t] {
                terms.push((beta_hi[t], 1.0));
            }
        }
        terms
    };
    lp.add_row("rdemand", dual_obj(), Relation::Ge, fc.total_consumption());
    lp.add_row("card", alpha.iter().map(|&j| (j, 1.0)), Relation::Ge, u.k_min as f64);
    let strong_duality_row = lp.add_row(
        "sduality",
        dual_obj().into_iter().chain(z.iter().map(|&j| (j, -k))),
        Relation::Eq,
        0.0,
    );

    let layout = SingleLevelLayout {
        c,
        e,
        s_plus: sp,
        s_minus: sm,
        z,
        alpha: alpha.clone(),
        beta_lo,
        beta_hi,
        zeta,
        balance_rows,
        strong_duality_row,
    };
    Ok((MilpProblem::new(lp, alpha), layout))
}

/// `max_t |z_t - c_t α_t|` at a point of the model.
pub fn linearization_residual(x: &[f64], layout: &SingleLevelLayout) -> f64 {
    (0..layout.c.len())
        .map(|t| (x[layout.z[t]] - x[layout.c[t]] * x[layout.alpha[t]]).abs())
        .fold(0.0, f64::max)
}
