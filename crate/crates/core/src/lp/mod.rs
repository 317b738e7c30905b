//! Linear programming kernel.
//!
//! Problems are stated as `min c·x` subject to rows `a·x {<=,>=,=} b` and
//! per-variable bounds that may be infinite. [`solve_lp`] runs a bounded
//! revised simplex (dual simplex from the slack basis when it is dual
//! feasible, composite primal simplex otherwise) and reports primal values,
//! row duals and reduced costs.
//!
//! Dual sign convention under minimization: a `>=` row has a nonnegative
//! dual, a `<=` row a nonpositive one, an `=` row is free.

mod lu;
pub(crate) mod simplex;

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

pub(crate) use simplex::{BasisSnapshot, Engine, Model};

/// Relation between a row activity and its right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// A minimization LP in row form with bounded variables.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    pub costs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub var_names: Vec<String>,
    pub rows: Vec<Row>,
}

impl LpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a variable and returns its index.
    pub fn add_var(&mut self, name: impl Into<String>, cost: f64, lower: f64, upper: f64) -> usize {
        self.costs.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.var_names.push(name.into());
        self.costs.len() - 1
    }

    /// Adds a row and returns its index. Coefficients are stored sorted by
    /// variable; entries on the same variable are summed and zeros dropped.
    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        coeffs: impl IntoIterator<Item = (usize, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> usize {
        let mut sorted: Vec<(usize, f64)> = coeffs.into_iter().collect();
        sorted.sort_by_key(|&(j, _)| j);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(sorted.len());
        for (j, v) in sorted {
            match merged.last_mut() {
                Some(e) if e.0 == j => e.1 += v,
                _ => merged.push((j, v)),
            }
        }
        merged.retain(|&(_, v)| v != 0.0);
        self.rows.push(Row {
            name: name.into(),
            coeffs: merged,
            relation,
            rhs,
        });
        self.rows.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.costs.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n || self.var_names.len() != n {
            return Err(Error::InvalidProblem("variable vectors differ in length".into()));
        }
        for j in 0..n {
            if !self.costs[j].is_finite() {
                return Err(Error::InvalidProblem(format!("cost of {} is not finite", self.var_names[j])));
            }
            if self.lower[j].is_nan() || self.upper[j].is_nan() || self.lower[j] > self.upper[j] {
                return Err(Error::InvalidProblem(format!(
                    "bounds of {} are inconsistent: [{}, {}]",
                    self.var_names[j], self.lower[j], self.upper[j]
                )));
            }
            if self.lower[j] == f64::INFINITY || self.upper[j] == f64::NEG_INFINITY {
                return Err(Error::InvalidProblem(format!("bounds of {} are infinite on the wrong side", self.var_names[j])));
            }
        }
        for row in &self.rows {
            if !row.rhs.is_finite() {
                return Err(Error::InvalidProblem(format!("rhs of row {} is not finite", row.name)));
            }
            for &(j, v) in &row.coeffs {
                if j >= n {
                    return Err(Error::InvalidProblem(format!("row {} references variable {j} out of range", row.name)));
                }
                if !v.is_finite() {
                    return Err(Error::InvalidProblem(format!("row {} has a non-finite coefficient", row.name)));
                }
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.costs.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn row_activity(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.coeffs.iter().map(|&(j, v)| v * x[j]).sum())
            .collect()
    }

    /// Largest bound or row violation of `x` (infinity norm).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.num_vars() {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        for (row, act) in self.rows.iter().zip(self.row_activity(x)) {
            let v = match row.relation {
                Relation::Le => act - row.rhs,
                Relation::Ge => row.rhs - act,
                Relation::Eq => (act - row.rhs).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub row_duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Tolerances and limits for the simplex kernel.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Primal feasibility tolerance on bounds of basic variables.
    pub feasibility_tol: f64,
    /// Reduced-cost tolerance for optimality.
    pub optimality_tol: f64,
    /// Iteration cap as a multiple of `rows + cols`.
    pub iteration_factor: usize,
    /// Consecutive degenerate iterations before switching to Bland's rule.
    pub bland_after: usize,
    /// Eta file length that triggers refactorization.
    pub refactor_every: usize,
    /// Skip the dual simplex start (for testing the primal path).
    pub force_primal: bool,
    /// Perturb costs during the dual simplex; the true costs are restored
    /// and re-optimized before returning.
    pub perturb: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            feasibility_tol: 1e-9,
            optimality_tol: 1e-9,
            iteration_factor: 50,
            bland_after: 200,
            refactor_every: 100,
            force_primal: false,
            perturb: true,
        }
    }
}

/// Solves `p` with default options.
pub fn solve_lp(p: &LpProblem) -> Result<LpSolution> {
    solve_lp_with(p, &SolverOptions::default())
}

pub fn solve_lp_with(p: &LpProblem, opts: &SolverOptions) -> Result<LpSolution> {
    p.validate()?;
    let model = Model::from_problem(p);
    let mut engine = Engine::new(&model, opts.clone());
    engine.solve()
}

/// As [`solve_lp_with`], starting from a basis in which variable `j` is
/// basic in place of row `i`'s logical for every `(i, j)` in `hint`. A good
/// hint (say, one state variable per balance row) saves most of the pivots
/// of a slack start; a poor one only costs a basis repair.
pub fn solve_lp_hinted(p: &LpProblem, opts: &SolverOptions, hint: &[(usize, usize)]) -> Result<LpSolution> {
    p.validate()?;
    let model = Model::from_problem(p);
    let mut engine = Engine::new(&model, opts.clone());
    engine.crash(hint);
    engine.solve()
}

/// Dual multiplier of `row` in an optimal solution.
pub fn dual_values(sol: &LpSolution, row: usize) -> Result<f64> {
    if !sol.is_optimal() {
        return Err(Error::NotOptimal);
    }
    sol.row_duals
        .get(row)
        .copied()
        .ok_or_else(|| Error::InvalidProblem(format!("row {row} out of range")))
}
