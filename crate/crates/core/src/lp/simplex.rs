//! Bounded revised simplex engine shared by the LP and MILP layers.
//!
//! Every row `i` gets a logical variable `r_i` with `A x - r = 0`, so the
//! relation of the row becomes a bound on `r_i`. The slack basis is
//! therefore always available as a starting point.

use super::lu::Factor;
use super::{LpProblem, LpSolution, LpStatus, Relation, SolverOptions};
use crate::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const DEGENERATE_STEP: f64 = 1e-12;

/// Column and row compressed copies of the constraint matrix plus the
/// bounds and costs of structural and logical variables.
#[derive(Debug, Clone)]
pub(crate) struct Model {
    pub n: usize,
    pub m: usize,
    col_start: Vec<usize>,
    col_idx: Vec<usize>,
    col_val: Vec<f64>,
    row_start: Vec<usize>,
    row_idx: Vec<usize>,
    row_val: Vec<f64>,
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Model {
    pub fn from_problem(p: &LpProblem) -> Model {
        let n = p.num_vars();
        let m = p.num_rows();
        let mut counts = vec![0usize; n];
        let mut row_start = Vec::with_capacity(m + 1);
        let mut row_idx = Vec::new();
        let mut row_val = Vec::new();
        row_start.push(0);
        for row in &p.rows {
            for &(j, v) in &row.coeffs {
                counts[j] += 1;
                row_idx.push(j);
                row_val.push(v);
            }
            row_start.push(row_idx.len());
        }
        let mut col_start = vec![0usize; n + 1];
        for j in 0..n {
            col_start[j + 1] = col_start[j] + counts[j];
        }
        let mut fill = col_start.clone();
        let mut col_idx = vec![0usize; row_idx.len()];
        let mut col_val = vec![0.0f64; row_idx.len()];
        for (i, row) in p.rows.iter().enumerate() {
            for &(j, v) in &row.coeffs {
                col_idx[fill[j]] = i;
                col_val[fill[j]] = v;
                fill[j] += 1;
            }
        }
        let mut cost = p.costs.clone();
        let mut lower = p.lower.clone();
        let mut upper = p.upper.clone();
        for row in &p.rows {
            cost.push(0.0);
            let (lo, hi) = match row.relation {
                Relation::Le => (f64::NEG_INFINITY, row.rhs),
                Relation::Ge => (row.rhs, f64::INFINITY),
                Relation::Eq => (row.rhs, row.rhs),
            };
            lower.push(lo);
            upper.push(hi);
        }
        Model {
            n,
            m,
            col_start,
            col_idx,
            col_val,
            row_start,
            row_idx,
            row_val,
            cost,
            lower,
            upper,
        }
    }

    fn column(&self, j: usize) -> Column<'_> {
        if j < self.n {
            let r = self.col_start[j]..self.col_start[j + 1];
            Column::Sparse(&self.col_idx[r.clone()], &self.col_val[r])
        } else {
            Column::Unit(j - self.n)
        }
    }

    fn column_vec(&self, j: usize) -> Vec<(usize, f64)> {
        match self.column(j) {
            Column::Sparse(idx, val) => idx.iter().copied().zip(val.iter().copied()).collect(),
            Column::Unit(i) => vec![(i, -1.0)],
        }
    }

    fn dot_column(&self, j: usize, y: &[f64]) -> f64 {
        match self.column(j) {
            Column::Sparse(idx, val) => idx.iter().zip(val).map(|(&i, &v)| v * y[i]).sum(),
            Column::Unit(i) => -y[i],
        }
    }
}

enum Column<'a> {
    Sparse(&'a [usize], &'a [f64]),
    Unit(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Status {
    Basic,
    Lower,
    Upper,
    /// Nonbasic free variable held at zero.
    Zero,
    Fixed,
}

/// A basis that can be restored into an engine built on the same model.
#[derive(Debug, Clone)]
pub(crate) struct BasisSnapshot {
    status: Vec<Status>,
    basis: Vec<usize>,
}

impl BasisSnapshot {
    /// Adapts the basis to a model with `added` more rows appended; their
    /// logicals enter the basis, which keeps it nonsingular.
    pub fn extend_rows(&mut self, added: usize) {
        let total = self.status.len();
        self.status.extend(std::iter::repeat(Status::Basic).take(added));
        self.basis.extend(total..total + added);
    }
}

enum Outcome {
    Optimal,
    Infeasible,
    Unbounded,
}

pub(crate) struct Engine<'a> {
    model: &'a Model,
    opts: SolverOptions,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    status: Vec<Status>,
    basis: Vec<usize>,
    x: Vec<f64>,
    d: Vec<f64>,
    factor: Option<Factor>,
    iterations: usize,
    iteration_limit: usize,
    degenerate_run: usize,
    work: Vec<f64>,
    touched: Vec<usize>,
    in_touched: Vec<bool>,
    alpha_row: Vec<f64>,
    flips: Vec<usize>,
    cands: Vec<(f64, usize)>,
}

impl<'a> Engine<'a> {
    pub fn new(model: &'a Model, opts: SolverOptions) -> Engine<'a> {
        let total = model.n + model.m;
        let mut e = Engine {
            model,
            iteration_limit: opts.iteration_factor.max(1) * (model.n + model.m).max(1),
            opts,
            cost: model.cost.clone(),
            lower: model.lower.clone(),
            upper: model.upper.clone(),
            status: vec![Status::Lower; total],
            basis: (model.n..total).collect(),
            x: vec![0.0; total],
            d: vec![0.0; total],
            factor: None,
            iterations: 0,
            degenerate_run: 0,
            work: Vec::new(),
            touched: Vec::new(),
            in_touched: vec![false; total],
            alpha_row: vec![0.0; total],
            flips: Vec::new(),
            cands: Vec::new(),
        };
        for j in 0..model.n {
            e.status[j] = e.nonbasic_status(j, model.cost[j] < 0.0);
        }
        for j in model.n..total {
            e.status[j] = Status::Basic;
        }
        e
    }

    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.lower[j] = lo;
        self.upper[j] = hi;
    }

    /// Starts from a basis in which structural `j` replaces the logical of
    /// row `i` for each `(i, j)`. Only valid on a fresh engine; a hint that
    /// turns out singular is repaired at factorization.
    pub fn crash(&mut self, pairs: &[(usize, usize)]) {
        let n = self.model.n;
        for &(i, j) in pairs {
            let logical = n + i;
            if j >= n || i >= self.model.m || self.status[j] == Status::Basic || self.basis[i] != logical {
                continue;
            }
            self.basis[i] = j;
            self.status[j] = Status::Basic;
            self.status[logical] = self.nonbasic_status(logical, false);
        }
        self.factor = None;
    }

    pub fn snapshot(&self) -> BasisSnapshot {
        BasisSnapshot {
            status: self.status.clone(),
            basis: self.basis.clone(),
        }
    }

    pub fn restore(&mut self, snap: &BasisSnapshot) {
        self.status.clone_from(&snap.status);
        self.basis.clone_from(&snap.basis);
        self.factor = None;
    }

    fn nonbasic_status(&self, j: usize, prefer_upper: bool) -> Status {
        let (l, u) = (self.lower[j], self.upper[j]);
        if l == u {
            Status::Fixed
        } else if prefer_upper && u.is_finite() {
            Status::Upper
        } else if l.is_finite() {
            Status::Lower
        } else if u.is_finite() {
            Status::Upper
        } else {
            Status::Zero
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.status[j] {
            Status::Lower | Status::Fixed => self.lower[j],
            Status::Upper => self.upper[j],
            Status::Zero => 0.0,
            Status::Basic => self.x[j],
        }
    }

    /// Re-derives nonbasic statuses and values after bound changes.
    fn normalize_nonbasic(&mut self) {
        for j in 0..self.status.len() {
            if self.status[j] == Status::Basic {
                continue;
            }
            let prefer_upper = match self.status[j] {
                Status::Upper => true,
                Status::Lower => false,
                _ => self.d[j] < 0.0,
            };
            self.status[j] = self.nonbasic_status(j, prefer_upper);
            self.x[j] = self.nonbasic_value(j);
        }
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.model.m;
        for _ in 0..=m.max(1) {
            let cols: Vec<Vec<(usize, f64)>> =
                self.basis.iter().map(|&j| self.model.column_vec(j)).collect();
            match Factor::new(m, &cols) {
                Ok(f) => {
                    self.factor = Some(f);
                    return Ok(());
                }
                Err(sing) => {
                    // Swap dependent columns for logicals of uncovered rows.
                    for (&pos, &row) in sing.positions.iter().zip(&sing.rows) {
                        let out = self.basis[pos];
                        let logical = self.model.n + row;
                        self.basis[pos] = logical;
                        self.status[logical] = Status::Basic;
                        self.status[out] = self.nonbasic_status(out, false);
                        self.x[out] = self.nonbasic_value(out);
                    }
                }
            }
        }
        Err(Error::Numerical("basis repair did not converge".into()))
    }

    fn factor(&self) -> &Factor {
        self.factor.as_ref().expect("basis is factorized")
    }

    fn compute_primal(&mut self) {
        let m = self.model.m;
        let mut rhs = vec![0.0; m];
        for j in 0..self.status.len() {
            if self.status[j] == Status::Basic {
                continue;
            }
            let v = self.x[j];
            if v == 0.0 {
                continue;
            }
            match self.model.column(j) {
                Column::Sparse(idx, val) => {
                    for (&i, &a) in idx.iter().zip(val) {
                        rhs[i] -= a * v;
                    }
                }
                Column::Unit(i) => rhs[i] += v,
            }
        }
        let mut work = std::mem::take(&mut self.work);
        self.factor().ftran(&mut rhs, &mut work);
        self.work = work;
        for (pos, &j) in self.basis.iter().enumerate() {
            self.x[j] = rhs[pos];
        }
    }

    /// Row prices for the given basic cost vector.
    fn prices(&mut self, basic_costs: Vec<f64>) -> Vec<f64> {
        let mut y = basic_costs;
        let mut work = std::mem::take(&mut self.work);
        self.factor().btran(&mut y, &mut work);
        self.work = work;
        y
    }

    fn compute_duals(&mut self) {
        let cb: Vec<f64> = self.basis.iter().map(|&j| self.cost[j]).collect();
        let y = self.prices(cb);
        for j in 0..self.status.len() {
            self.d[j] = if self.status[j] == Status::Basic {
                0.0
            } else {
                self.cost[j] - self.model.dot_column(j, &y)
            };
        }
    }

    fn ftran_column(&mut self, j: usize) -> Vec<f64> {
        let mut col = vec![0.0; self.model.m];
        match self.model.column(j) {
            Column::Sparse(idx, val) => {
                for (&i, &a) in idx.iter().zip(val) {
                    col[i] = a;
                }
            }
            Column::Unit(i) => col[i] = -1.0,
        }
        let mut work = std::mem::take(&mut self.work);
        self.factor().ftran(&mut col, &mut work);
        self.work = work;
        col
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        let tol = self.opts.feasibility_tol;
        if v < self.lower[j] - tol {
            self.lower[j] - v
        } else if v > self.upper[j] + tol {
            v - self.upper[j]
        } else {
            0.0
        }
    }

    fn max_primal_infeasibility(&self) -> f64 {
        self.basis
            .iter()
            .map(|&j| self.infeasibility(j))
            .fold(0.0, f64::max)
    }

    fn dual_violation(&self, j: usize) -> f64 {
        let tol = self.opts.optimality_tol;
        let d = self.d[j];
        match self.status[j] {
            Status::Basic | Status::Fixed => 0.0,
            Status::Lower if d < -tol => -d,
            Status::Upper if d > tol => d,
            Status::Zero if d.abs() > tol => d.abs(),
            _ => 0.0,
        }
    }

    /// Flips boxed variables to the bound matching their reduced cost sign.
    /// Returns false if some violation cannot be repaired by a flip.
    fn make_dual_feasible(&mut self) -> bool {
        let mut flipped = false;
        for j in 0..self.status.len() {
            if self.dual_violation(j) == 0.0 {
                continue;
            }
            let boxed = self.lower[j].is_finite() && self.upper[j].is_finite();
            if !boxed {
                return false;
            }
            self.status[j] = if self.d[j] < 0.0 { Status::Upper } else { Status::Lower };
            self.x[j] = self.nonbasic_value(j);
            flipped = true;
        }
        if flipped {
            self.compute_primal();
        }
        true
    }

    fn max_dual_violation(&self) -> f64 {
        (0..self.status.len())
            .map(|j| self.dual_violation(j))
            .fold(0.0, f64::max)
    }

    fn bump_iteration(&mut self) -> Result<()> {
        self.iterations += 1;
        if self.iterations > self.iteration_limit {
            return Err(Error::IterationLimit {
                iterations: self.iterations - 1,
            });
        }
        Ok(())
    }

    fn maybe_refactor(&mut self) -> Result<bool> {
        let f = self.factor();
        if f.num_updates() >= self.opts.refactor_every || f.eta_nnz() > 20 * self.model.m + 1000 {
            self.refactor()?;
            self.compute_primal();
            return Ok(true);
        }
        Ok(false)
    }

    fn pivot(&mut self, pos: usize, entering: usize, leaving_status: Status, alpha: &[f64]) -> Result<()> {
        let leaving = self.basis[pos];
        self.status[leaving] = leaving_status;
        self.x[leaving] = self.nonbasic_value(leaving);
        self.status[entering] = Status::Basic;
        self.basis[pos] = entering;
        self.d[entering] = 0.0;
        if alpha[pos].abs() < 1e-7 {
            self.refactor()?;
            self.compute_primal();
            self.compute_duals();
        } else {
            self.factor.as_mut().unwrap().update(pos, alpha);
        }
        Ok(())
    }

    fn note_step(&mut self, step: f64) {
        if step.abs() < DEGENERATE_STEP {
            self.degenerate_run += 1;
        } else {
            self.degenerate_run = 0;
        }
    }

    fn bland(&self) -> bool {
        self.degenerate_run > self.opts.bland_after
    }

    /// Top-level solve from the current basis.
    pub fn solve(&mut self) -> Result<LpSolution> {
        self.iterations = 0;
        self.degenerate_run = 0;
        self.normalize_nonbasic();
        self.refactor()?;
        self.compute_primal();
        self.compute_duals();

        let mut use_dual = !self.opts.force_primal && self.make_dual_feasible();
        let mut perturbed = use_dual && self.opts.perturb && self.perturb_costs();
        let mut rounds = 0;
        let outcome = loop {
            rounds += 1;
            let outcome = if use_dual {
                let outcome = self.dual_simplex();
                if perturbed {
                    self.cost.clone_from(&self.model.cost);
                    perturbed = false;
                }
                outcome?
            } else {
                match self.primal_simplex(true)? {
                    Outcome::Optimal => self.primal_simplex(false)?,
                    other => other,
                }
            };
            if !matches!(outcome, Outcome::Optimal) {
                break outcome;
            }
            // Verify on a fresh factorization.
            self.refactor()?;
            self.compute_primal();
            self.compute_duals();
            let pinf = self.max_primal_infeasibility();
            let dinf = self.max_dual_violation();
            if pinf == 0.0 && dinf == 0.0 {
                break Outcome::Optimal;
            }
            if rounds > 8 {
                return Err(Error::Numerical(format!(
                    "no convergence: primal infeasibility {pinf:e}, dual infeasibility {dinf:e}"
                )));
            }
            use_dual = pinf > 0.0 && !self.opts.force_primal && self.make_dual_feasible();
        };
        Ok(self.build_solution(match outcome {
            Outcome::Optimal => LpStatus::Optimal,
            Outcome::Infeasible => LpStatus::Infeasible,
            Outcome::Unbounded => LpStatus::Unbounded,
        }))
    }

    /// Shifts nonbasic structural costs away from zero reduced cost in the
    /// direction that keeps the basis dual feasible. Returns whether anything
    /// changed.
    fn perturb_costs(&mut self) -> bool {
        let n = self.model.n;
        let scale = self.cost[..n].iter().fold(0.0f64, |a, c| a.max(c.abs())).max(1.0);
        let mut changed = false;
        for j in 0..n {
            let dir = match self.status[j] {
                Status::Lower => 1.0,
                Status::Upper => -1.0,
                _ => continue,
            };
            let u = (splitmix(j as u64) >> 11) as f64 / (1u64 << 53) as f64;
            let eps = 1e-7 * scale * (1.0 + u) + 1e-7 * self.cost[j].abs();
            self.cost[j] += dir * eps;
            self.d[j] += dir * eps;
            changed = true;
        }
        changed
    }

    fn build_solution(&mut self, status: LpStatus) -> LpSolution {
        let n = self.model.n;
        let m = self.model.m;
        let cb: Vec<f64> = self.basis.iter().map(|&j| self.cost[j]).collect();
        let y = self.prices(cb);
        let x: Vec<f64> = self.x[..n].to_vec();
        let objective: f64 = (0..n).map(|j| self.cost[j] * x[j]).sum();
        let mut reduced = vec![0.0; n];
        let mut dual_objective = 0.0;
        for j in 0..n + m {
            if self.status[j] == Status::Basic {
                continue;
            }
            let d = if j < n { self.cost[j] - self.model.dot_column(j, &y) } else { y[j - n] };
            if j < n {
                reduced[j] = d;
            }
            dual_objective += d * self.x[j];
        }
        LpSolution {
            status,
            x,
            row_duals: y,
            reduced_costs: reduced,
            objective,
            dual_objective,
            iterations: self.iterations,
        }
    }

    /// Primal simplex; phase one minimizes the sum of bound violations.
    fn primal_simplex(&mut self, phase_one: bool) -> Result<Outcome> {
        let total = self.status.len();
        let ftol = self.opts.feasibility_tol;
        let otol = self.opts.optimality_tol;
        loop {
            self.maybe_refactor()?;
            let costs: Vec<f64> = if phase_one {
                let mut any = false;
                let cb = self
                    .basis
                    .iter()
                    .map(|&j| {
                        if self.x[j] < self.lower[j] - ftol {
                            any = true;
                            -1.0
                        } else if self.x[j] > self.upper[j] + ftol {
                            any = true;
                            1.0
                        } else {
                            0.0
                        }
                    })
                    .collect();
                if !any {
                    return Ok(Outcome::Optimal);
                }
                cb
            } else {
                self.basis.iter().map(|&j| self.cost[j]).collect()
            };
            let y = self.prices(costs);

            // Pricing.
            let bland = self.bland();
            let mut entering: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..total {
                let st = self.status[j];
                if matches!(st, Status::Basic | Status::Fixed) {
                    continue;
                }
                let cj = if phase_one { 0.0 } else { self.cost[j] };
                let d = cj - self.model.dot_column(j, &y);
                if !phase_one {
                    self.d[j] = d;
                }
                let dir = match st {
                    Status::Lower if d < -otol => 1.0,
                    Status::Upper if d > otol => -1.0,
                    Status::Zero if d.abs() > otol => -d.signum(),
                    _ => continue,
                };
                if bland {
                    if entering.is_none() {
                        entering = Some((j, dir));
                    }
                } else if d.abs() > best {
                    best = d.abs();
                    entering = Some((j, dir));
                }
            }
            let Some((q, dir)) = entering else {
                return Ok(if phase_one { Outcome::Infeasible } else { Outcome::Optimal });
            };
            self.bump_iteration()?;

            let alpha = self.ftran_column(q);
            // Harris ratio test.
            let mut theta_max = f64::INFINITY;
            let mut cands: Vec<(usize, f64, Status)> = Vec::new();
            for (pos, &a) in alpha.iter().enumerate() {
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let j = self.basis[pos];
                let rate = -dir * a;
                let (v, l, u) = (self.x[j], self.lower[j], self.upper[j]);
                let limit = if phase_one && v < l - ftol {
                    (rate > 0.0).then(|| ((l - v) / rate, (l - v) / rate, Status::Lower))
                } else if phase_one && v > u + ftol {
                    (rate < 0.0).then(|| ((v - u) / -rate, (v - u) / -rate, Status::Upper))
                } else if rate > 0.0 && u.is_finite() {
                    Some(((u - v + ftol) / rate, ((u - v) / rate).max(0.0), Status::Upper))
                } else if rate < 0.0 && l.is_finite() {
                    Some(((v - l + ftol) / -rate, ((v - l) / -rate).max(0.0), Status::Lower))
                } else {
                    None
                };
                if let Some((relaxed, exact, st)) = limit {
                    theta_max = theta_max.min(relaxed);
                    cands.push((pos, exact, st));
                }
            }
            let mut leave: Option<(usize, f64, Status)> = None;
            for &(pos, exact, st) in &cands {
                if exact > theta_max {
                    continue;
                }
                let better = match leave {
                    None => true,
                    Some((bp, _, _)) => {
                        if bland {
                            self.basis[pos] < self.basis[bp]
                        } else {
                            let (a, b) = (alpha[pos].abs(), alpha[bp].abs());
                            a > b || (a == b && self.basis[pos] < self.basis[bp])
                        }
                    }
                };
                if better {
                    leave = Some((pos, exact, st));
                }
            }

            let range = self.upper[q] - self.lower[q];
            let flip_allowed = matches!(self.status[q], Status::Lower | Status::Upper) && range.is_finite();
            let step_leave = leave.map(|(_, t, _)| t).unwrap_or(f64::INFINITY);
            if flip_allowed && range <= step_leave {
                self.apply_step(q, dir, range, &alpha);
                self.status[q] = if self.status[q] == Status::Lower { Status::Upper } else { Status::Lower };
                self.x[q] = self.nonbasic_value(q);
                self.note_step(range);
                continue;
            }
            let Some((pos, theta, st)) = leave else {
                if phase_one {
                    return Err(Error::Numerical("phase one direction without a blocking variable".into()));
                }
                return Ok(Outcome::Unbounded);
            };
            self.apply_step(q, dir, theta, &alpha);
            let leaving = self.basis[pos];
            let st = if self.lower[leaving] == self.upper[leaving] { Status::Fixed } else { st };
            self.note_step(theta);
            self.pivot(pos, q, st, &alpha)?;
        }
    }

    fn apply_step(&mut self, q: usize, dir: f64, theta: f64, alpha: &[f64]) {
        if theta == 0.0 {
            return;
        }
        self.x[q] += dir * theta;
        for (pos, &a) in alpha.iter().enumerate() {
            if a != 0.0 {
                let j = self.basis[pos];
                self.x[j] -= dir * theta * a;
            }
        }
    }

    fn compute_alpha_row(&mut self, rho: &[f64]) {
        for &j in &self.touched {
            self.alpha_row[j] = 0.0;
            self.in_touched[j] = false;
        }
        self.touched.clear();
        let n = self.model.n;
        for (i, &r) in rho.iter().enumerate() {
            if r == 0.0 {
                continue;
            }
            for k in self.model.row_start[i]..self.model.row_start[i + 1] {
                let j = self.model.row_idx[k];
                if self.status[j] == Status::Basic {
                    continue;
                }
                if !self.in_touched[j] {
                    self.in_touched[j] = true;
                    self.touched.push(j);
                }
                self.alpha_row[j] += r * self.model.row_val[k];
            }
            let logical = n + i;
            if self.status[logical] != Status::Basic {
                self.alpha_row[logical] = -r;
                self.in_touched[logical] = true;
                self.touched.push(logical);
            }
        }
        self.touched.sort_unstable();
    }

    /// Bound-flipping ratio test. Breakpoints of boxed variables are passed
    /// (and queued in `flips`) while the leaving row stays infeasible; the
    /// entering variable is picked by a Harris pass over the rest.
    fn dual_ratio_test(&mut self, sigma: f64, infeasibility: f64, bland: bool) -> Option<usize> {
        let otol = self.opts.optimality_tol;
        self.flips.clear();
        let mut cands = std::mem::take(&mut self.cands);
        cands.clear();
        for &j in &self.touched {
            let a = self.alpha_row[j];
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let d = self.d[j];
            let exact = match self.status[j] {
                Status::Lower if sigma * a > 0.0 => d.max(0.0) / a.abs(),
                Status::Upper if sigma * a < 0.0 => (-d).max(0.0) / a.abs(),
                Status::Zero => d.abs() / a.abs(),
                _ => continue,
            };
            cands.push((exact, j));
        }
        cands.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        let mut start = 0;
        if !bland {
            let mut slope = infeasibility;
            while start < cands.len() {
                let j = cands[start].1;
                let range = self.upper[j] - self.lower[j];
                if self.status[j] == Status::Zero || !range.is_finite() {
                    break;
                }
                let next = slope - self.alpha_row[j].abs() * range;
                if next <= self.opts.feasibility_tol {
                    break;
                }
                slope = next;
                self.flips.push(j);
                start += 1;
            }
        }
        let rest = &cands[start..];
        let mut theta_max = f64::INFINITY;
        for &(_, j) in rest {
            let a = self.alpha_row[j].abs();
            let d = self.d[j];
            let relaxed = match self.status[j] {
                Status::Lower => (d + otol) / a,
                Status::Upper => (-d + otol) / a,
                _ => (d.abs() + otol) / a,
            };
            theta_max = theta_max.min(relaxed);
        }
        let mut entering: Option<usize> = None;
        for &(exact, j) in rest {
            if exact > theta_max {
                break;
            }
            let better = match entering {
                None => true,
                Some(b) => {
                    if bland {
                        j < b
                    } else {
                        let (x, y) = (self.alpha_row[j].abs(), self.alpha_row[b].abs());
                        x > y || (x == y && j < b)
                    }
                }
            };
            if better {
                entering = Some(j);
            }
        }
        self.cands = cands;
        if entering.is_none() {
self.flips.clear();
        }
        entering
    }

    /// Moves the queued boxed variables to their opposite bounds.
    fn apply_flips(&mut self) {
        let mut col = vec![0.0; self.model.m];
        for k in 0..self.flips.len() {
            let j = self.flips[k];
            let (status, value) = if self.status[j] == Status::Lower {
                (Status::Upper, self.upper[j])
            } else {
                (Status::Lower, self.lower[j])
            };
            let delta = value - self.x[j];
            self.status[j] = status;
            self.x[j] = value;
            match self.model.column(j) {
                Column::Sparse(idx, val) => {
                    for (&i, &a) in idx.iter().zip(val) {
                        col[i] += a * delta;
                    }
                }
                Column::Unit(i) => col[i] -= delta,
            }
        }
        let mut work = std::mem::take(&mut self.work);
        self.factor().ftran(&mut col, &mut work);
        self.work = work;
        for (pos, &j) in self.basis.iter().enumerate() {
            self.x[j] -= col[pos];
        }
        self.flips.clear();
    }

    /// Dual simplex from a dual feasible basis.
    fn dual_simplex(&mut self) -> Result<Outcome> {
        let m = self.model.m;
        loop {
            if self.maybe_refactor()? {
                self.compute_duals();
            }
            let bland = self.bland();
            // Leaving row.
            let mut leave: Option<(usize, f64)> = None;
            for (pos, &j) in self.basis.iter().enumerate() {
                let inf = self.infeasibility(j);
                if inf <= 0.0 {
                    continue;
                }
                let better = match leave {
                    None => true,
                    Some((bp, binf)) => {
                        if bland {
                            j < self.basis[bp]
                        } else {
                            inf > binf || (inf == binf && j < self.basis[bp])
                        }
                    }
                };
                if better {
                    leave = Some((pos, inf));
                }
            }
            let Some((r, _)) = leave else {
                return Ok(Outcome::Optimal);
            };
            self.bump_iteration()?;
            let jr = self.basis[r];
            let to_lower = self.x[jr] < self.lower[jr];
            let target = if to_lower { self.lower[jr] } else { self.upper[jr] };
            let sigma = if to_lower { -1.0 } else { 1.0 };

            let mut e = vec![0.0; m];
            e[r] = 1.0;
            let rho = self.prices(e);
            self.compute_alpha_row(&rho);

            let Some(q) = self.dual_ratio_test(sigma, (self.x[jr] - target).abs(), bland) else {
                return Ok(Outcome::Infeasible);
            };
            if !self.flips.is_empty() {
                self.apply_flips();
            }

            let alpha = self.ftran_column(q);
            let aq = self.alpha_row[q];
            if (alpha[r] - aq).abs() > 1e-7 * (1.0 + aq.abs()) {
                // Drifted factorization; rebuild and retry this iteration.
                self.refactor()?;
                self.compute_primal();
                self.compute_duals();
                continue;
            }

            // Dual update.
            let t = self.d[q] / aq;
            for &j in &self.touched {
                let a = self.alpha_row[j];
                if a != 0.0 && self.status[j] != Status::Basic {
                    self.d[j] -= t * a;
                }
            }
            self.d[q] = 0.0;
            self.d[jr] = -t;
            // Primal update.
            let delta = (self.x[jr] - target) / alpha[r];
            self.x[q] += delta;
            for (pos, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    let j = self.basis[pos];
                    self.x[j] -= a * delta;
                }
            }
            self.x[jr] = target;
            let st = if self.lower[jr] == self.upper[jr] {
                Status::Fixed
            } else if to_lower {
                Status::Lower
            } else {
                Status::Upper
            };
            self.note_step(t);
            self.pivot(r, q, st, &alpha)?;
        }
    }
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
