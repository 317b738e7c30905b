//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails at the end if any criterion failed.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use evagg::data::{generate_history, GeneratorConfig};
use evagg::deterministic::solve_deterministic;
use evagg::fleet::{DayRecord, Weekday};
use evagg::lp::{solve_lp, LpProblem, LpStatus, Relation};
use evagg::milp::{solve_milp, MilpProblem, MilpStatus};
use evagg::realtime::{evaluate_day, evaluate_month, Method, MonthConfig};
use evagg::robust::{
    solve_robust, solve_robust_ccg_with, solve_robust_with, worst_case_lp, worst_case_oracle, CcgOptions,
    RobustInstance, RobustOptions,
};
use evagg::verify::instances::{bilevel_case, fixed_availability_case, fleet_case, oracle_case, robust_from_oracle_case};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{basic_solutions_min, brute_force_bilevel, certain_instance, enumerate_fixings};

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn one_thread() -> RobustOptions {
    RobustOptions { threads: 1, ..Default::default() }
}

fn ccg_one_thread() -> CcgOptions {
    CcgOptions { threads: 1, ..Default::default() }
}

fn oracle_equivalence() -> Verdict {
    let start = Instant::now();
    let (mut worst_frac, mut worst_rel, mut failures) = (0.0f64, 0.0f64, Vec::new());
    for seed in 0..200 {
        let case = oracle_case(seed);
        let n = case.grid.n_periods;
        assert!((4..=96).contains(&n));
        let greedy = worst_case_oracle(&case.c, &case.ev, &case.grid, &case.set).unwrap();
        let lp = worst_case_lp(&case.c, &case.ev, &case.grid, &case.set).unwrap();
        let r = rel(lp.energy_kwh, greedy.energy_kwh);
        worst_frac = worst_frac.max(lp.max_fractionality);
        worst_rel = worst_rel.max(r);
        if lp.max_fractionality > 1e-9 || r > 1e-9 {
            failures.push(seed);
        }
    }
    let elapsed = start.elapsed();
    verdict(
        failures.is_empty() && elapsed < Duration::from_secs(30),
        format!(
            "200 instances, max fractionality {worst_frac:.1e}, max relative gap {worst_rel:.1e}, {:.2} s, failing seeds {failures:?}",
            elapsed.as_secs_f64()
        ),
    )
}

fn bilevel_exactness() -> Verdict {
    let start = Instant::now();
    let (mut worst, mut failures, mut checked) = (0.0f64, Vec::new(), 0);
    for seed in 0..50 {
        let inst = bilevel_case(seed);
        assert!(inst.grid.n_periods <= 8);
        let solved = solve_robust(&inst);
        match (brute_force_bilevel(&inst), solved) {
            (Some(b), Ok(s)) => {
                checked += 1;
                let d = (s.objective_eur - b.objective).abs();
                worst = worst.max(d);
                if d > 1e-6 {
                    failures.push(seed);
                }
            }
            (None, Err(_)) => checked += 1,
            _ => failures.push(seed),
        }
    }
    let elapsed = start.elapsed();
    verdict(
        failures.is_empty() && checked == 50 && elapsed < Duration::from_secs(120),
        format!("{checked} instances, max |difference| {worst:.1e}, {:.2} s, failing seeds {failures:?}", elapsed.as_secs_f64()),
    )
}

/// Instances of the first two criteria: robust versions of the adversary
/// family, then the small bilevel family.
fn robust_family() -> Vec<(String, RobustInstance)> {
    let mut out: Vec<(String, RobustInstance)> =
        (0..200).map(|s| (format!("oracle {s}"), robust_from_oracle_case(s))).collect();
    out.extend((0..50).map(|s| (format!("bilevel {s}"), bilevel_case(s))));
    out
}

/// Recomputes the lower-level primal and dual objectives from the reported
/// plan, pattern and duals, and checks dual feasibility.
fn reformulation_internals(family: &[(String, RobustInstance)]) -> Verdict {
    let (mut worst_dual, mut worst_lin, mut failures, mut optima) = (0.0f64, 0.0f64, Vec::new(), 0);
    for (label, inst) in family {
        let Ok(out) = solve_robust_with(inst, &one_thread()) else { continue };
        optima += 1;
        let s = &out.schedule;
        let mut ok = true;
        for (v, ev) in inst.fleet.iter().enumerate() {
            let u = &inst.uncertainty[v];
            let k = ev.energy_per_kw(&inst.grid);
            let (zeta, lo, hi) = (s.dual_k[v], &s.dual_lo[v], &s.dual_hi[v]);
            let mut primal = 0.0;
            let mut dual = u.k_min as f64 * zeta;
            for t in 0..inst.grid.n_periods {
                let a = s.wc_alpha[v][t];
                if a {
                    primal += k * s.charge_kw[v][t];
                }
                if u.alpha_lo[t] {
                    dual += lo[t];
                }
                if u.alpha_hi[t] {
                    dual += hi[t];
                }
                let reduced = k * s.charge_kw[v][t] - zeta - lo[t] - hi[t];
                if reduced < -1e-6 || lo[t] < -1e-9 || hi[t] > 1e-9 {
                    ok = false;
                }
                let z = if a { s.charge_kw[v][t] } else { 0.0 };
                worst_lin = worst_lin.max((s.linear_charge_kw[v][t] - z).abs());
            }
            if zeta < -1e-9 {
                ok = false;
            }
            worst_dual = worst_dual.max((primal - dual).abs());
        }
        if !ok {
            failures.push(label.clone());
        }
    }
    verdict(
        failures.is_empty() && worst_dual <= 1e-6 && worst_lin <= 1e-9,
        format!(
            "{optima} optima, max duality residual {worst_dual:.1e}, max |z - c·α| {worst_lin:.1e}, dual infeasible {failures:?}"
        ),
    )
}

fn method_equivalence(family: &[(String, RobustInstance)]) -> Verdict {
    let (mut worst, mut failures) = (0.0f64, Vec::new());
    let mut compare = |label: &str, inst: &RobustInstance| {
        let milp = solve_robust_with(inst, &one_thread());
        let ccg = solve_robust_ccg_with(inst, &ccg_one_thread());
        match (milp, ccg) {
            (Ok(m), Ok(c)) => {
                let d = (m.schedule.objective_eur - c.schedule.objective_eur).abs();
                worst = worst.max(d);
                if d > 1e-6 {
                    failures.push(label.to_string());
                }
            }
            (Err(_), Err(_)) => {}
            _ => failures.push(label.to_string()),
        }
    };
    for (label, inst) in family {
        compare(label, inst);
    }
    let big = fleet_case(2024, 10, 96);
    let start = Instant::now();
    let robust = solve_robust_with(&big, &one_thread()).unwrap();
    let robust_time = start.elapsed();
    let ccg = solve_robust_ccg_with(&big, &ccg_one_thread()).unwrap();
    let d = (robust.schedule.objective_eur - ccg.schedule.objective_eur).abs();
    worst = worst.max(d);
    if d > 1e-6 {
        failures.push("10x96".into());
    }
    verdict(
        failures.is_empty() && robust_time < Duration::from_secs(60),
        format!(
            "{} instances, max |difference| {worst:.1e}, 10x96 robust solve {:.2} s, failing {failures:?}",
            family.len() + 1,
            robust_time.as_secs_f64()
        ),
    )
}

fn degeneracy_collapse() -> Verdict {
    let (mut worst, mut failures) = (0.0f64, Vec::new());
    for seed in 0..10 {
        let inst = fixed_availability_case(seed);
        let n = inst.grid.n_periods;
        let u = &inst.uncertainty[0];
        assert!(u.alpha_lo.iter().all(|&a| a) && u.alpha_hi.iter().all(|&a| a) && u.k_min == n);
        assert!(inst.forecasts[0].alpha_hat.iter().all(|&a| a == 1.0));
        let det = solve_deterministic(&inst).unwrap().objective_eur;
        let rob = solve_robust(&inst).unwrap().objective_eur;
        let d = (det - rob).abs();
        worst = worst.max(d);
        if d > 1e-6 {
            failures.push(seed);
        }
    }
    verdict(failures.is_empty(), format!("10 instances, max |difference| {worst:.1e}, failing seeds {failures:?}"))
}

fn synthetic_month() -> Verdict {
    let start = Instant::now();
    let cfg = GeneratorConfig::default();
    let history = generate_history(&cfg).unwrap();
    let report = evaluate_month(&history, &cfg.fleet(), cfg.grid().unwrap(), &MonthConfig::default(), |_| {}).unwrap();
    let elapsed = start.elapsed();
    let det = report.summary_for(Method::Deterministic).unwrap();
    let rob = report.summary_for(Method::Robust).unwrap();
    let reduction = 1.0 - rob.d_rt_kwh.total / det.d_rt_kwh.total;
    let shape = cfg.n_vehicles == 100 && cfg.n_periods == 96 && det.days == 29 && rob.days == 29 && report.lookback == 4;
    verdict(
        shape
            && rob.c_da_eur.total > det.c_da_eur.total
            && rob.d_rt_kwh.total < det.d_rt_kwh.total
            && reduction >= 0.25
            && elapsed < Duration::from_secs(30 * 60),
        format!(
            "{} EVs, {} days: C^DA {:.1} (RO) vs {:.1} (DO) EUR, D^RT {:.1} (RO) vs {:.1} (DO) kWh, reduction {:.1}%, {:.1} s",
            cfg.n_vehicles,
            det.days,
            rob.c_da_eur.total,
            det.c_da_eur.total,
            rob.d_rt_kwh.total,
            det.d_rt_kwh.total,
            100.0 * reduction,
            elapsed.as_secs_f64()
        ),
    )
}

fn realtime_consistency() -> Verdict {
    let mut worst = 0.0f64;
    for seed in 0..3 {
        let inst = certain_instance(seed, 6, 96);
        let realized = DayRecord {
            date_index: 0,
            weekday: Weekday::Monday,
            realized_alpha: inst.uncertainty.iter().map(|u| u.alpha_hi.clone()).collect(),
            realized_xi_kwh: inst.forecasts.iter().map(|f| f.xi_hat_kwh.clone()).collect(),
            prices: inst.prices.clone(),
        };
        for method in [Method::Deterministic, Method::Robust] {
            let eval = evaluate_day(&inst, method, &realized, &one_thread()).unwrap();
            worst = worst.max(eval.metrics.d_rt_kwh);
        }
    }
    verdict(worst <= 1e-6, format!("3 fixed-forecast days, both methods, max D^RT {worst:.1e} kWh"))
}

/// Largest number of bases the enumeration may visit.
const BASIS_LIMIT: f64 = 400_000.0;

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn relation(k: u32) -> Relation {
    match k {
        0 => Relation::Le,
        1 => Relation::Ge,
        _ => Relation::Eq,
    }
}

/// Random LP over `x ≥ 0` with `Σx ≤ 10` as its first row. Most instances
/// are feasible around a random point; inequality rows turn into equalities
/// until the slack-form enumeration fits in [`BASIS_LIMIT`].
fn random_lp(seed: u64) -> LpProblem {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let (m, n) = if seed == 0 { (12, 20) } else { (r.gen_range(1..=12), r.gen_range(1..=20)) };
    let x0: Vec<f64> = (0..n).map(|_| 0.25 * r.gen_range(0..=2) as f64).collect();
    let anchored = r.gen_bool(0.9);
    let mut rels: Vec<Relation> = (1..m).map(|_| relation(r.gen_range(0..3))).collect();
    loop {
        let slacks = 1 + rels.iter().filter(|&&rl| rl != Relation::Eq).count();
        if binomial(n + slacks, m) <= BASIS_LIMIT {
            break;
        }
        let last = rels.iter().rposition(|&rl| rl != Relation::Eq).unwrap();
        rels[last] = Relation::Eq;
    }
    let mut p = LpProblem::new();
    for j in 0..n {
        p.add_var(format!("x{j}"), r.gen_range(-5..=5) as f64, 0.0, f64::INFINITY);
    }
    p.add_row("bound", (0..n).map(|j| (j, 1.0)), Relation::Le, 10.0);
    for (i, rel) in rels.into_iter().enumerate() {
        let a: Vec<f64> = (0..n).map(|_| r.gen_range(-4..=4) as f64).collect();
        let act: f64 = a.iter().zip(&x0).map(|(a, x)| a * x).sum();
        let slack = r.gen_range(0..=3) as f64;
        let rhs = if anchored {
            match rel {
                Relation::Le => act + slack,
                Relation::Ge => act - slack,
                Relation::Eq => act,
            }
        } else {
            r.gen_range(-6..=6) as f64
        };
        p.add_row(format!("r{i}"), a.into_iter().enumerate(), rel, rhs);
    }
    p
}

/// Random MILP with 1..=12 binaries, a few bounded continuous columns and
/// rows anchored at a random mixed point in most instances.
fn random_milp(seed: u64) -> MilpProblem {
    let mut r = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
    let k = if seed == 0 { 12 } else { r.gen_range(1..=12) };
    let cont = r.gen_range(0..=4);
    let m = r.gen_range(1..=8);
    let mut lp = LpProblem::new();
    let mut x0 = Vec::new();
    let mut binaries = Vec::new();
    for j in 0..k {
        binaries.push(lp.add_var(format!("b{j}"), r.gen_range(-6..=6) as f64, 0.0, 1.0));
        x0.push(f64::from(u8::from(r.gen_bool(0.5))));
    }
    for j in 0..cont {
        let lo = r.gen_range(-2..=0) as f64;
        let hi = lo + r.gen_range(1..=4) as f64;
        lp.add_var(format!("y{j}"), r.gen_range(-4..=4) as f64, lo, hi);
        x0.push(lo + r.gen_range(0.0..1.0) * (hi - lo));
    }
    let anchored = r.gen_bool(0.85);
    for i in 0..m {
        let a: Vec<f64> = (0..k + cont).map(|_| r.gen_range(-4..=4) as f64).collect();
        let act: f64 = a.iter().zip(&x0).map(|(a, x)| a * x).sum();
        let rel = relation(r.gen_range(0..3));
        let rhs = if !anchored {
            r.gen_range(-5..=5) as f64
        } else {
            match rel {
                Relation::Le => act + r.gen_range(0..=2) as f64,
                Relation::Ge => act - r.gen_range(0..=2) as f64,
                Relation::Eq => act,
            }
        };
        lp.add_row(format!("r{i}"), a.into_iter().enumerate(), rel, rhs);
    }
    MilpProblem::new(lp, binaries)
}

fn solver_soundness() -> Verdict {
    let (mut lp_worst, mut lp_fail, mut infeasible, mut largest) = (0.0f64, Vec::new(), 0, (0, 0));
    for seed in 0..100 {
        let p = random_lp(seed);
        largest = largest.max((p.num_rows(), p.num_vars()));
        assert!(p.num_rows() <= 12 && p.num_vars() <= 20);
        let s = solve_lp(&p).unwrap();
        match basic_solutions_min(&p) {
            Some(best) => {
                let d = (s.objective - best).abs();
                lp_worst = lp_worst.max(d);
                if s.status != LpStatus::Optimal || d > 1e-7 {
                    lp_fail.push(seed);
                }
            }
            None => {
                infeasible += 1;
                if s.status != LpStatus::Infeasible {
                    lp_fail.push(seed);
                }
            }
        }
    }
    let (mut milp_worst, mut milp_fail) = (0.0f64, Vec::new());
    for seed in 0..50 {
        let p = random_milp(seed);
        assert!(p.binaries.len() <= 12);
        let s = solve_milp(&p, 0.0, usize::MAX).unwrap();
        match enumerate_fixings(&p) {
            Some(best) => {
                let d = (s.objective - best).abs();
                milp_worst = milp_worst.max(d);
                if s.status != MilpStatus::Optimal || d > 1e-6 {
                    milp_fail.push(seed);
                }
            }
            None => {
                if s.status != MilpStatus::Infeasible {
                    milp_fail.push(seed);
                }
            }
        }
    }
    verdict(
        lp_fail.is_empty() && milp_fail.is_empty(),
        format!(
            "100 LPs (largest {}x{}, {infeasible} infeasible) max |difference| {lp_worst:.1e}, failing {lp_fail:?}; \
             50 MILPs max |difference| {milp_worst:.1e}, failing {milp_fail:?}",
            largest.0, largest.1
        ),
    )
}

fn run_cli(args: &[&str]) -> bool {
    let out = Command::new(env!("CARGO_BIN_EXE_evagg")).args(args).output().expect("binary runs");
    if !out.status.success() {
        eprintln!("{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    out.status.success()
}

fn same_tree(a: &Path, b: &Path) -> Result<usize, String> {
    let mut names: Vec<_> = fs::read_dir(a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    for name in &names {
        let (x, y) = (a.join(name), b.join(name));
        if fs::read(&x).ok() != fs::read(&y).ok() {
            return Err(format!("{} differs", x.display()));
        }
    }
    Ok(names.len())
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let p = |s: &str| dir.path().join(s).to_str().unwrap().to_string();
    fs::write(p("cfg.toml"), "seed = 11\nn_vehicles = 12\nn_days = 40\n").unwrap();
    let mut files = 0;
    let mut problems = Vec::new();
    for run in ["1", "2"] {
        let ok = run_cli(&["generate", "--config", &p("cfg.toml"), "--out", &p(&format!("gen{run}"))])
            && run_cli(&[
                "solve", "--config", &p("cfg.toml"), "--history", &p("gen1"), "--dump-mps", &p(&format!("mps{run}")),
                "--out", &p(&format!("solve{run}")),
            ])
            && run_cli(&["month", "--config", &p("cfg.toml"), "--history", &p("gen1"), "--out", &p(&format!("month{run}"))])
            && run_cli(&["verify", "--oracle-seeds", "20", "--bilevel-seeds", "10", "--out", &p(&format!("verify{run}"))]);
        if !ok {
            problems.push(format!("run {run} failed"));
        }
    }
    for stage in ["gen", "mps", "solve", "month", "verify"] {
        match same_tree(&dir.path().join(format!("{stage}1")), &dir.path().join(format!("{stage}2"))) {
            Ok(n) => files += n,
            Err(e) => problems.push(e),
        }
    }
    verdict(problems.is_empty() && files > 0, format!("{files} output files compared across two runs, problems {problems:?}"))
}

#[test]
fn acceptance_criteria() {
    let family = robust_family();
    let checks: Vec<(&str, Box<dyn Fn() -> Verdict + '_>)> = vec![
        ("oracle/LP equivalence", Box::new(oracle_equivalence)),
        ("bilevel exactness", Box::new(bilevel_exactness)),
        ("reformulation internals", Box::new(|| reformulation_internals(&family))),
        ("method equivalence", Box::new(|| method_equivalence(&family))),
        ("degeneracy collapse", Box::new(degeneracy_collapse)),
        ("synthetic month", Box::new(synthetic_month)),
        ("real-time consistency", Box::new(realtime_consistency)),
        ("solver soundness", Box::new(solver_soundness)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in checks.iter().enumerate() {
        let v = check();
        let tag = if v.passed { "PASS" } else { "FAIL" };
        println!("criterion {} ({name}): {tag}: {}", i + 1, v.detail);
        if !v.passed {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
