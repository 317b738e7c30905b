//! The adversary's problem: given a charging plan, pick the availability
//! pattern in the uncertainty set that delivers the least energy.
//!
//! The constraint matrix (one cardinality row plus box bounds) is totally
//! unimodular, so the LP relaxation has an integral optimum and the greedy
//! rule below is exact.

use serde::{Deserialize, Serialize};

use crate::fleet::{EvParams, TimeGrid, UncertaintySet};
use crate::lp::{solve_lp, LpProblem, LpStatus, Relation};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseResult {
    pub alpha: Vec<bool>,
    pub energy_kwh: f64,
    /// Dual of the cardinality row (ζ).
    pub dual_k: f64,
    /// Duals of `α ≥ α̲` (β̲, nonnegative).
    pub dual_lo: Vec<f64>,
    /// Duals of `α ≤ ᾱ` (β̄, nonpositive).
    pub dual_hi: Vec<f64>,
    /// Largest distance of the raw α values to {0, 1}; zero for the greedy oracle.
    pub max_fractionality: f64,
}

impl WorstCaseResult {
    /// `Kζ + Σ(α̲β̲ + ᾱβ̄)`.
    pub fn dual_objective(&self, u: &UncertaintySet) -> f64 {
        dual_objective(u, self.dual_k, &self.dual_lo, &self.dual_hi)
    }
}

pub(crate) fn dual_objective(u: &UncertaintySet, zeta: f64, lo: &[f64], hi: &[f64]) -> f64 {
    let mut s = u.k_min as f64 * zeta;
    for t in 0..u.len() {
        if u.alpha_lo[t] {
            s += lo[t];
        }
        if u.alpha_hi[t] {
            s += hi[t];
        }
    }
    s
}

/// Per-period energy delivered if the vehicle is available: `Δt·η·c_t`.
pub fn coefficients(c: &[f64], ev: &EvParams, grid: &TimeGrid) -> Vec<f64> {
    let k = ev.energy_per_kw(grid);
    c.iter().map(|&v| k * v).collect()
}

fn check_inputs(c: &[f64], grid: &TimeGrid, u: &UncertaintySet) -> Result<()> {
    if c.len() != grid.n_periods || u.len() != grid.n_periods {
        return Err(Error::Validation(format!(
            "charge vector has {} periods, uncertainty set {}, grid {}",
            c.len(),
            u.len(),
            grid.n_periods
        )));
    }
    if u.is_empty() {
        return Err(Error::EmptyUncertaintySet(format!(
            "{} periods can be available but at least {} are required",
            u.alpha_hi.iter().filter(|&&a| a).count(),
            u.k_min
        )));
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("charge vector contains non-finite values".into()));
    }
    Ok(())
}

/// Number of free periods the adversary must switch on beyond the forced ones.
pub(crate) fn extra_needed(u: &UncertaintySet) -> usize {
    u.k_min.saturating_sub(u.forced_ones())
}

/// Greedy minimizer: forced periods at their bound, then the cheapest free
/// periods (lowest index on ties) until the cardinality floor is met.
pub fn worst_case_oracle(c: &[f64], ev: &EvParams, grid: &TimeGrid, u: &UncertaintySet) -> Result<WorstCaseResult> {
    check_inputs(c, grid, u)?;
    let coeff = coefficients(c, ev, grid);
    let n = coeff.len();
    let mut alpha = u.alpha_lo.clone();
    let m = extra_needed(u);
    let mut free: Vec<usize> = (0..n).filter(|&t| !u.alpha_lo[t] && u.alpha_hi[t]).collect();
    free.sort_by(|&a, &b| coeff[a].total_cmp(&coeff[b]).then(a.cmp(&b)));
    for &t in &free[..m] {
        alpha[t] = true;
    }
    let zeta = if m > 0 { coeff[free[m - 1]] } else { 0.0 };
    let mut dual_lo = vec![0.0; n];
    let mut dual_hi = vec![0.0; n];
    for t in 0..n {
        let r = coeff[t] - zeta;
        if u.alpha_lo[t] {
            dual_lo[t] = r.max(0.0);
        }
        dual_hi[t] = r.min(0.0);
    }
    let energy_kwh = (0..n).filter(|&t| alpha[t]).map(|t| coeff[t]).sum();
    Ok(WorstCaseResult { alpha, energy_kwh, dual_k: zeta, dual_lo, dual_hi, max_fractionality: 0.0 })
}

/// Solves the relaxed adversary problem with the LP kernel. Box bounds are
/// variable bounds; β̲ and β̄ are the positive and negative parts of the
/// reduced costs.
pub fn worst_case_lp(c: &[f64], ev: &EvParams, grid: &TimeGrid, u: &UncertaintySet) -> Result<WorstCaseResult> {
    check_inputs(c, grid, u)?;
    let coeff = coefficients(c, ev, grid);
    let n = coeff.len();
    let mut lp = LpProblem::new();
    let vars: Vec<usize> = (0..n)
        .map(|t| {
            let lo = if u.alpha_lo[t] { 1.0 } else { 0.0 };
            let hi = if u.alpha_hi[t] { 1.0 } else { 0.0 };
            lp.add_var(format!("a{}", t + 1), coeff[t], lo, hi)
        })
        .collect();
    let row = lp.add_row("card", vars.iter().map(|&j| (j, 1.0)), Relation::Ge, u.k_min as f64);
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Numerical(format!("adversary LP ended {:?}", sol.status)));
    }
    let zeta = sol.row_duals[row];
    let max_fractionality = sol.x.iter().map(|&a| (a - a.round()).abs()).fold(0.0, f64::max);
    let alpha: Vec<bool> = sol.x.iter().map(|&a| a > 0.5).collect();
    let dual_lo = sol.reduced_costs.iter().map(|&d| d.max(0.0)).collect();
    let dual_hi = sol.reduced_costs.iter().map(|&d| d.min(0.0)).collect();
    Ok(WorstCaseResult { alpha, energy_kwh: sol.objective, dual_k: zeta, dual_lo, dual_hi, max_fractionality })
}
