//! Test-only oracles that avoid the duality machinery under test.
#![allow(dead_code)]

use evagg::fleet::UncertaintySet;
use evagg::lp::{solve_lp, LpProblem, LpStatus, Relation};
use evagg::milp::MilpProblem;
use evagg::robust::{worst_case_oracle, RobustInstance};
use evagg::verify::instances::fleet_case;

/// Every integral point of the uncertainty set.
pub fn patterns(u: &UncertaintySet) -> Vec<Vec<bool>> {
    let n = u.len();
    let mut out = Vec::new();
    for mask in 0u64..(1 << n) {
        let a: Vec<bool> = (0..n).map(|t| mask >> t & 1 == 1).collect();
        if u.contains(&a) {
            out.push(a);
        }
    }
    out
}

pub struct BilevelOptimum {
    pub objective: f64,
    pub c: Vec<f64>,
    pub alpha: Vec<bool>,
}

/// Exhaustive bilevel value of a single-vehicle instance: for each pattern
/// α, the cheapest plan whose battery balance uses α, for which α is a
/// minimizer of the adversary (explicit comparison with every pattern) and
/// which meets the demand under α. `None` if no pattern admits a plan.
pub fn brute_force_bilevel(inst: &RobustInstance) -> Option<BilevelOptimum> {
    assert_eq!(inst.num_vehicles(), 1);
    let ev = &inst.fleet[0];
    let grid = &inst.grid;
    let n = grid.n_periods;
    let fc = &inst.forecasts[0];
    let k = grid.dt_hours * ev.efficiency;
    let demand: f64 = fc.xi_hat_kwh.iter().sum();
    let all = patterns(&inst.uncertainty[0]);
    let mut best: Option<BilevelOptimum> = None;
    for alpha in &all {
        let mut lp = LpProblem::new();
        let c: Vec<usize> = (0..n)
            .map(|t| lp.add_var(format!("c{t}"), inst.prices.eur_per_kwh[t] * grid.dt_hours, 0.0, ev.max_charge_kw))
            .collect();
        let e: Vec<usize> = (0..n)
            .map(|t| {
                if t + 1 == n {
                    lp.add_var(format!("e{t}"), 0.0, ev.e_init_kwh, ev.e_init_kwh)
                } else {
                    lp.add_var(format!("e{t}"), 0.0, ev.e_min_kwh, ev.e_max_kwh)
                }
            })
            .collect();
        let sp: Vec<usize> = (0..n).map(|t| lp.add_var(format!("sp{t}"), inst.penalty_eur_per_kwh, 0.0, f64::INFINITY)).collect();
        let sm: Vec<usize> = (0..n).map(|t| lp.add_var(format!("sm{t}"), inst.penalty_eur_per_kwh, 0.0, f64::INFINITY)).collect();
        for t in 0..n {
            let a = if alpha[t] { 1.0 } else { 0.0 };
            let mut row = vec![(e[t], 1.0), (c[t], -k * a), (sp[t], -1.0), (sm[t], 1.0)];
            let mut rhs = -fc.xi_hat_kwh[t];
            if t == 0 {
                rhs += ev.e_init_kwh;
            } else {
                row.push((e[t - 1], -1.0));
            }
            lp.add_row(format!("b{t}"), row, Relation::Eq, rhs);
        }
        lp.add_row("demand", (0..n).filter(|&t| alpha[t]).map(|t| (c[t], k)), Relation::Ge, demand);
        for (i, other) in all.iter().enumerate() {
            let row: Vec<(usize, f64)> = (0..n)
                .map(|t| (c[t], k * (alpha[t] as u8 as f64 - other[t] as u8 as f64)))
                .collect();
            lp.add_row(format!("min{i}"), row, Relation::Le, 0.0);
        }
        let sol = solve_lp(&lp).unwrap();
        if sol.status != LpStatus::Optimal {
            continue;
        }
        if best.as_ref().map_or(true, |b| sol.objective < b.objective) {
            best = Some(BilevelOptimum { objective: sol.objective, c: c.iter().map(|&j| sol.x[j]).collect(), alpha: alpha.clone() });
        }
    }
    if let Some(b) = &best {
        // Fixed point: the greedy adversary attains the same value at the optimum.
        let wc = worst_case_oracle(&b.c, ev, grid, &inst.uncertainty[0]).unwrap();
        let own: f64 = (0..n).filter(|&t| b.alpha[t]).map(|t| k * b.c[t]).sum();
        assert!((wc.energy_kwh - own).abs() <= 1e-7, "fixed point violated: {} vs {own}", wc.energy_kwh);
    }
    best
}

/// Minimum of the LP over every fixing of the binaries.
pub fn enumerate_fixings(p: &MilpProblem) -> Option<f64> {
    let k = p.binaries.len();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << k) {
        let mut lp = p.lp.clone();
        let mut ok = true;
        for (b, &j) in p.binaries.iter().enumerate() {
            let v = ((mask >> b) & 1) as f64;
            if v < lp.lower[j] || v > lp.upper[j] {
                ok = false;
            }
            lp.lower[j] = v;
            lp.upper[j] = v;
        }
        if !ok {
            continue;
        }
        let s = solve_lp(&lp).unwrap();
        if s.status == LpStatus::Optimal && best.map_or(true, |b| s.objective < b) {
            best = Some(s.objective);
        }
    }
    best
}

/// Solves a dense square system by Gaussian elimination with partial pivoting.
pub fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() < 1e-9 {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Some(x)
}

/// Drops rows of `[A | b]` (given by columns) that are combinations of
/// earlier ones; `None` if such a row contradicts them.
fn independent_rows(cols: &[Vec<f64>], b: &[f64]) -> Option<(Vec<Vec<f64>>, Vec<f64>)> {
    let m = b.len();
    let mut rows: Vec<Vec<f64>> = (0..m).map(|i| cols.iter().map(|c| c[i]).chain([b[i]]).collect()).collect();
    let n = cols.len();
    let mut keep = Vec::new();
    let mut reduced: Vec<Vec<f64>> = Vec::new();
    let mut pivots: Vec<usize> = Vec::new();
    for (i, row) in rows.iter_mut().enumerate() {
        for (r, &pc) in reduced.iter().zip(&pivots) {
            let f = row[pc] / r[pc];
            if f != 0.0 {
                for j in 0..=n {
                    row[j] -= f * r[j];
                }
            }
        }
        match (0..n).max_by(|&a, &c| row[a].abs().total_cmp(&row[c].abs())) {
            Some(pc) if row[pc].abs() > 1e-9 => {
                // Keep every stored row zero at the other pivots.
                for r in reduced.iter_mut() {
                    let f = r[pc] / row[pc];
                    for j in 0..=n {
                        r[j] -= f * row[j];
                    }
                }
                pivots.push(pc);
                reduced.push(row.clone());
                keep.push(i);
            }
            _ if row[n].abs() > 1e-9 => return None,
            _ => {}
        }
    }
    let cols = cols.iter().map(|c| keep.iter().map(|&i| c[i]).collect()).collect();
    Some((cols, keep.iter().map(|&i| b[i]).collect()))
}

/// Minimum over the basic feasible solutions of an LP whose variables are
/// bounded below by zero and unbounded above: each inequality row gets a
/// slack, and redundant rows are dropped and every choice of `rank` columns is tried
/// as a basis. `None` if
/// no basis is feasible.
pub fn basic_solutions_min(p: &LpProblem) -> Option<f64> {
    let n = p.num_vars();
    let m = p.num_rows();
    assert!(p.lower.iter().all(|&l| l == 0.0) && p.upper.iter().all(|u| u.is_infinite()));
    let mut cols: Vec<Vec<f64>> = (0..n).map(|_| vec![0.0; m]).collect();
    let mut cost = p.costs.clone();
    for (i, row) in p.rows.iter().enumerate() {
        for &(j, v) in &row.coeffs {
            cols[j][i] += v;
        }
    }
    for (i, row) in p.rows.iter().enumerate() {
        let sign = match row.relation {
            Relation::Le => 1.0,
            Relation::Ge => -1.0,
            Relation::Eq => continue,
        };
        let mut c = vec![0.0; m];
        c[i] = sign;
        cols.push(c);
        cost.push(0.0);
    }
    let b: Vec<f64> = p.rows.iter().map(|r| r.rhs).collect();
    let (cols, b) = independent_rows(&cols, &b)?;
    let m = b.len();
    let total = cols.len();
    let mut best: Option<f64> = None;
    let mut pick: Vec<usize> = (0..m).collect();
    if m == 0 {
        return Some(0.0);
    }
    loop {
        let a: Vec<Vec<f64>> = (0..m).map(|i| pick.iter().map(|&j| cols[j][i]).collect()).collect();
        if let Some(x) = gauss(a, b.clone()) {
            if x.iter().all(|&v| v >= -1e-9) {
                let f: f64 = pick.iter().zip(&x).map(|(&j, v)| cost[j] * v).sum();
                if best.map_or(true, |bst| f < bst) {
                    best = Some(f);
                }
            }
        }
        // Next combination in lexicographic order.
        let mut i = m;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if pick[i] < total - m + i {
                break;
            }
        }
        pick[i] += 1;
        for k in i + 1..m {
            pick[k] = pick[k - 1] + 1;
        }
    }
}

/// Fixed availability pattern per vehicle, consumption only while away.
pub fn certain_instance(seed: u64, vehicles: usize, n: usize) -> RobustInstance {
    let mut inst = fleet_case(seed, vehicles, n);
    for v in 0..vehicles {
        let hi = inst.uncertainty[v].alpha_hi.clone();
        let total: f64 = inst.forecasts[v].xi_hat_kwh.iter().sum();
        let away = hi.iter().filter(|&&a| !a).count() as f64;
        inst.forecasts[v].xi_hat_kwh = hi.iter().map(|&a| if a { 0.0 } else { total / away }).collect();
        inst.forecasts[v].alpha_hat = hi.iter().map(|&a| f64::from(u8::from(a))).collect();
        inst.uncertainty[v] = UncertaintySet::fixed(&hi);
    }
    inst
}
