//! Branch-and-bound over binary variables on top of the simplex engine.
//!
//! Nodes are explored best-bound first (ties: deeper, then newer). Each
//! child restarts from its parent's optimal basis, so a node usually costs
//! a handful of dual simplex pivots. When a node's relaxation is integral
//! within tolerance, the binaries are fixed to their rounded values and the
//! LP is re-solved, which makes every incumbent exactly binary.

mod mps;

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::lp::{BasisSnapshot, Engine, LpProblem, LpStatus, Model, Relation, SolverOptions};
use crate::{Error, Result};

pub use mps::{export_mps, import_mps, parse_mps, write_mps};

/// Distance from {0, 1} below which a binary counts as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MilpProblem {
    pub lp: LpProblem,
    pub binaries: Vec<usize>,
}

impl MilpProblem {
    pub fn new(lp: LpProblem, binaries: Vec<usize>) -> Self {
        MilpProblem { lp, binaries }
    }

    pub fn validate(&self) -> Result<()> {
        self.lp.validate()?;
        let n = self.lp.num_vars();
        let mut seen = vec![false; n];
        for &j in &self.binaries {
            if j >= n {
                return Err(Error::InvalidProblem(format!("binary index {j} out of range")));
            }
            if seen[j] {
                return Err(Error::InvalidProblem(format!("binary {} listed twice", self.lp.var_names[j])));
            }
            seen[j] = true;
            let (lo, hi) = (self.lp.lower[j], self.lp.upper[j]);
            if lo < 0.0 || hi > 1.0 || lo.fract() != 0.0 || hi.fract() != 0.0 {
                return Err(Error::InvalidProblem(format!(
                    "binary {} has bounds [{lo}, {hi}]",
                    self.lp.var_names[j]
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MilpStatus {
    Optimal,
    /// Search stopped at the node limit; `x` holds the incumbent if any.
    NodeLimit,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution {
    pub status: MilpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Best proven lower bound.
    pub bound: f64,
    /// `(objective - bound) / max(1, |objective|)`; infinite without incumbent.
    pub gap: f64,
    pub nodes: usize,
    pub lp_iterations: usize,
    /// Rows added by a lazy-constraint callback.
    pub lazy_rows: usize,
}

impl MilpSolution {
    pub fn has_incumbent(&self) -> bool {
        !self.x.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct MilpOptions {
    pub gap_target: f64,
    pub node_limit: usize,
    pub lp: SolverOptions,
}

impl Default for MilpOptions {
    fn default() -> Self {
        MilpOptions { gap_target: 0.0, node_limit: usize::MAX, lp: SolverOptions::default() }
    }
}

/// Solves `p` to the relative gap `gap_target`, exploring at most `node_limit` nodes.
pub fn solve_milp(p: &MilpProblem, gap_target: f64, node_limit: usize) -> Result<MilpSolution> {
    solve_milp_with(p, &MilpOptions { gap_target, node_limit, ..Default::default() })
}

struct Node {
    bound: f64,
    depth: usize,
    id: usize,
    fixings: Vec<(usize, f64)>,
    basis: Option<BasisSnapshot>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap pops the greatest: lowest bound, then deepest, then newest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(self.id.cmp(&other.id))
    }
}

fn relative_gap(incumbent: f64, bound: f64) -> f64 {
    if !incumbent.is_finite() {
        return f64::INFINITY;
    }
    ((incumbent - bound) / incumbent.abs().max(1.0)).max(0.0)
}

pub fn solve_milp_with(p: &MilpProblem, opts: &MilpOptions) -> Result<MilpSolution> {
    solve_milp_from(p, opts, None)
}

/// As [`solve_milp_with`], seeded with a known feasible point. A start that is
/// not binary or violates a row or bound by more than `1e-7` is ignored.
pub fn solve_milp_from(p: &MilpProblem, opts: &MilpOptions, start: Option<&[f64]>) -> Result<MilpSolution> {
    let mut search = Search::new(p, opts, start)?;
    search.run(None)?;
    Ok(search.finish())
}

/// A row added during the search.
#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// Verdict of a lazy-constraint callback on an integral candidate.
#[derive(Debug, Clone, PartialEq)]
pub enum Separation {
    Accept,
    /// The candidate violates `cuts`. `heuristic` may offer a point that is
    /// feasible once the cuts are added; it is checked before use. Integral
    /// candidates must come with at least one cut.
    Reject { cuts: Vec<Cut>, heuristic: Option<Vec<f64>> },
}

/// Branch-and-bound with rows generated on the fly. `separate(x, integral)`
/// sees every node solution: integral ones (after polishing) must be
/// accepted before they can become the incumbent, fractional ones may be
/// cut off to tighten the relaxation. After a rejection the cuts join the
/// model and the node is solved again. Returns the solution and the problem
/// with all cuts appended.
pub fn solve_milp_lazy(
    p: &MilpProblem,
    opts: &MilpOptions,
    start: Option<&[f64]>,
    mut separate: impl FnMut(&[f64], bool) -> Result<Separation>,
) -> Result<(MilpSolution, MilpProblem)> {
    let mut search = Search::new(p, opts, start)?;
    search.run(Some(&mut separate))?;
    let problem = MilpProblem { lp: search.lp.clone(), binaries: p.binaries.clone() };
    Ok((search.finish(), problem))
}

type Separator<'s> = &'s mut dyn FnMut(&[f64], bool) -> Result<Separation>;

enum Stop {
    Exhausted,
    Done(MilpStatus, f64),
    Cuts { node: Node, snap: BasisSnapshot, cuts: Vec<Cut>, heuristic: Option<Vec<f64>> },
}

struct Search<'p> {
    opts: &'p MilpOptions,
    binaries: &'p [usize],
    base: Vec<(f64, f64)>,
    lp: LpProblem,
    heap: BinaryHeap<Node>,
    next_id: usize,
    nodes: usize,
    lp_iterations: usize,
    lazy_rows: usize,
    incumbent: Option<(f64, Vec<f64>)>,
    status: MilpStatus,
    bound: f64,
}

impl<'p> Search<'p> {
    fn new(p: &'p MilpProblem, opts: &'p MilpOptions, start: Option<&[f64]>) -> Result<Self> {
        p.validate()?;
        if !(opts.gap_target >= 0.0) {
            return Err(Error::InvalidProblem(format!("gap target must be nonnegative, got {}", opts.gap_target)));
        }
        let mut search = Search {
            opts,
            binaries: &p.binaries,
            base: p.binaries.iter().map(|&j| (p.lp.lower[j], p.lp.upper[j])).collect(),
            lp: p.lp.clone(),
            heap: BinaryHeap::new(),
            next_id: 1,
            nodes: 0,
            lp_iterations: 0,
            lazy_rows: 0,
            incumbent: None,
            status: MilpStatus::Infeasible,
            bound: f64::INFINITY,
        };
        search.heap.push(Node { bound: f64::NEG_INFINITY, depth: 0, id: 0, fixings: Vec::new(), basis: None });
        if let Some(x) = start {
            search.offer(x);
        }
        Ok(search)
    }

    fn incumbent_objective(&self) -> f64 {
        self.incumbent.as_ref().map_or(f64::INFINITY, |(o, _)| *o)
    }

    /// Takes `x` as incumbent if it is feasible and improves.
    fn offer(&mut self, x: &[f64]) {
        let feasible = x.len() == self.lp.num_vars()
            && self.binaries.iter().all(|&j| x[j] == 0.0 || x[j] == 1.0)
            && self.lp.max_violation(x) <= 1e-7;
        if feasible {
            let obj = self.lp.objective_value(x);
            if obj < self.incumbent_objective() {
                self.incumbent = Some((obj, x.to_vec()));
            }
        }
    }

    fn run(&mut self, mut separate: Option<Separator<'_>>) -> Result<()> {
        loop {
            let model = Model::from_problem(&self.lp);
            let stop = {
                let mut engine = Engine::new(&model, self.opts.lp.clone());
                self.explore(&mut engine, &mut separate)?
            };
            match stop {
                Stop::Exhausted => {
                    self.status = if self.incumbent.is_some() { MilpStatus::Optimal } else { MilpStatus::Infeasible };
                    self.bound = self.incumbent_objective();
                    return Ok(());
                }
                Stop::Done(status, bound) => {
                    self.status = status;
                    self.bound = bound;
                    return Ok(());
                }
                Stop::Cuts { mut node, mut snap, cuts, heuristic } => {
                    let added = cuts.len();
                    for cut in cuts {
                        self.lp.add_row(format!("lazy{}", self.lazy_rows + 1), cut.coeffs, cut.relation, cut.rhs);
                        self.lazy_rows += 1;
                    }
                    snap.extend_rows(added);
                    node.basis = Some(snap);
                    let mut open = std::mem::take(&mut self.heap).into_vec();
                    for n in &mut open {
                        if let Some(b) = &mut n.basis {
                            b.extend_rows(added);
                        }
                    }
                    open.push(node);
                    self.heap = BinaryHeap::from(open);
                    if let Some(x) = heuristic {
                        self.offer(&x);
                    }
                }
            }
        }
    }

    fn explore(&mut self, engine: &mut Engine<'_>, separate: &mut Option<Separator<'_>>) -> Result<Stop> {
        let prune_tol = 1e-9;
        while let Some(node) = self.heap.pop() {
            let inc_obj = self.incumbent_objective();
            if self.incumbent.is_some() && relative_gap(inc_obj, node.bound) <= self.opts.gap_target.max(prune_tol) {
                // Best-bound order: every open node is at least as bad.
                let bound = if self.opts.gap_target == 0.0 { inc_obj } else { node.bound };
                return Ok(Stop::Done(MilpStatus::Optimal, bound));
            }
            if self.nodes >= self.opts.node_limit {
                let bound = node.bound;
                self.heap.push(node);
                return Ok(Stop::Done(MilpStatus::NodeLimit, bound));
            }
            self.nodes += 1;

            for (k, &j) in self.binaries.iter().enumerate() {
                engine.set_bounds(j, self.base[k].0, self.base[k].1);
            }
            for &(j, v) in &node.fixings {
                engine.set_bounds(j, v, v);
            }
            if let Some(snap) = &node.basis {
                engine.restore(snap);
            }
            let sol = engine.solve()?;
            self.lp_iterations += sol.iterations;
            match sol.status {
                LpStatus::Infeasible => continue,
                LpStatus::Unbounded => return Ok(Stop::Done(MilpStatus::Unbounded, f64::NEG_INFINITY)),
                LpStatus::Optimal => {}
            }
            if self.incumbent.is_some() && relative_gap(inc_obj, sol.objective) <= prune_tol {
                continue;
            }

            let mut branch: Option<(usize, f64)> = None;
            for &j in self.binaries {
                let frac = (sol.x[j] - sol.x[j].floor()).min(sol.x[j].ceil() - sol.x[j]);
                if frac > INTEGRALITY_TOL && branch.map_or(true, |(_, f)| frac > f) {
                    branch = Some((j, frac));
                }
            }

            match branch {
                None => {
                    let snap = engine.snapshot();
                    // Polish: pin binaries to their rounded values.
                    for &j in self.binaries {
                        let r = sol.x[j].round();
                        engine.set_bounds(j, r, r);
                    }
                    let mut polished = engine.solve()?;
                    self.lp_iterations += polished.iterations;
                    // A fixed binary can stay basic with round-off; report it exactly.
                    for &j in self.binaries {
                        polished.x[j] = sol.x[j].round();
                    }
                    if polished.status != LpStatus::Optimal || polished.objective >= inc_obj {
                        continue;
                    }
                    let verdict = match separate {
                        Some(f) => f(&polished.x, true)?,
                        None => Separation::Accept,
                    };
                    match verdict {
                        Separation::Accept => self.incumbent = Some((polished.objective, polished.x)),
                        Separation::Reject { cuts, heuristic } => {
                            if cuts.is_empty() {
                                return Err(Error::Numerical("lazy callback rejected a point without a cut".into()));
                            }
                            let node = Node { bound: sol.objective, ..node };
                            return Ok(Stop::Cuts { node, snap, cuts, heuristic });
                        }
                    }
                }
                Some((j, _)) => {
                    let snap = engine.snapshot();
                    if let Some(f) = separate {
                        if let Separation::Reject { cuts, heuristic } = f(&sol.x, false)? {
                            if !cuts.is_empty() {
                                let node = Node { bound: sol.objective, ..node };
                                return Ok(Stop::Cuts { node, snap, cuts, heuristic });
                            }
                            if let Some(x) = heuristic {
                                self.offer(&x);
                            }
                        }
                    }
                    // Push the up branch first so the down branch wins exact ties on id.
                    for v in [1.0, 0.0] {
                        let mut fixings = node.fixings.clone();
                        fixings.push((j, v));
                        self.heap.push(Node {
                            bound: sol.objective,
                            depth: node.depth + 1,
                            id: self.next_id,
                            fixings,
                            basis: Some(snap.clone()),
                        });
                        self.next_id += 1;
                    }
                }
            }
        }
        Ok(Stop::Exhausted)
    }

    fn finish(self) -> MilpSolution {
        let (objective, x) = self.incumbent.unwrap_or((f64::INFINITY, Vec::new()));
        if self.status == MilpStatus::Unbounded {
            return MilpSolution {
                status: MilpStatus::Unbounded,
                x: Vec::new(),
                objective: f64::NEG_INFINITY,
                bound: f64::NEG_INFINITY,
                gap: f64::INFINITY,
                nodes: self.nodes,
                lp_iterations: self.lp_iterations,
                lazy_rows: self.lazy_rows,
            };
        }
        let bound = self.bound.min(objective);
        MilpSolution {
            status: self.status,
            gap: relative_gap(objective, bound),
            x,
            objective,
            bound,
            nodes: self.nodes,
            lp_iterations: self.lp_iterations,
            lazy_rows: self.lazy_rows,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{solve_lp, Relation};

    #[test]
    fn two_binary_toy() {
        let mut lp = LpProblem::new();
        let x1 = lp.add_var("x1", -1.0, 0.0, 1.0);
        let x2 = lp.add_var("x2", -2.0, 0.0, 1.0);
        lp.add_row("r", [(x1, 1.0), (x2, 1.0)], Relation::Le, 1.0);
        let s = solve_milp(&MilpProblem::new(lp, vec![x1, x2]), 0.0, usize::MAX).unwrap();
        assert_eq!(s.status, MilpStatus::Optimal);
        assert_eq!(s.x, vec![0.0, 1.0]);
        assert_eq!(s.objective, -2.0);
        assert_eq!(s.gap, 0.0);
    }

    #[test]
    fn fixed_binaries_need_no_branching() {
        let mut lp = LpProblem::new();
        let a = lp.add_var("a", 1.0, 1.0, 1.0);
        let y = lp.add_var("y", 2.0, 0.0, 5.0);
        lp.add_row("r", [(a, 2.0), (y, 1.0)], Relation::Ge, 3.5);
        let s = solve_milp(&MilpProblem::new(lp.clone(), vec![a]), 0.0, usize::MAX).unwrap();
        let l = solve_lp(&lp).unwrap();
        assert_eq!(s.nodes, 1);
        assert!((s.objective - l.objective).abs() < 1e-12);
    }

    #[test]
    fn infeasible_integer_program() {
        // x1 + x2 = 1.5 has fractional solutions only.
        let mut lp = LpProblem::new();
        let x1 = lp.add_var("x1", 0.0, 0.0, 1.0);
        let x2 = lp.add_var("x2", 0.0, 0.0, 1.0);
        lp.add_row("r", [(x1, 1.0), (x2, 1.0)], Relation::Eq, 1.5);
        let s = solve_milp(&MilpProblem::new(lp, vec![x1, x2]), 0.0, usize::MAX).unwrap();
        assert_eq!(s.status, MilpStatus::Infeasible);
        assert!(!s.has_incumbent());
        assert!(s.nodes <= 7);
    }

    #[test]
    fn node_limit_returns_incumbent_and_gap() {
        // Knapsack where the root relaxation is fractional.
        let w = [3.0, 4.0, 5.0, 6.0, 7.0];
        let v = [4.0, 5.0, 6.0, 8.0, 9.0];
        let mut lp = LpProblem::new();
        let xs: Vec<usize> = (0..5).map(|i| lp.add_var(format!("x{i}"), -v[i], 0.0, 1.0)).collect();
        lp.add_row("cap", xs.iter().map(|&j| (j, w[j])), Relation::Le, 13.5);
        let p = MilpProblem::new(lp, xs);
        let full = solve_milp(&p, 0.0, usize::MAX).unwrap();
        assert_eq!(full.status, MilpStatus::Optimal);
        let cut = solve_milp(&p, 0.0, 1).unwrap();
        assert_eq!(cut.status, MilpStatus::NodeLimit);
        assert!(cut.gap > 0.0);
        assert!(cut.bound <= full.objective + 1e-9);
    }

    #[test]
    fn rejects_bad_binaries() {
        let mut lp = LpProblem::new();
        let x = lp.add_var("x", 1.0, 0.0, 2.0);
        assert!(solve_milp(&MilpProblem::new(lp, vec![x]), 0.0, 10).is_err());
    }
}
