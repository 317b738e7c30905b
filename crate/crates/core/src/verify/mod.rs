//! Self-checks over seeded instance families.
//!
//! Each suite runs a property over a family and counts the instances where
//! it holds. The report is plain data so front ends can print or serialize it.

pub mod instances;

use serde::{Deserialize, Serialize};

use crate::par::{default_threads, map_indexed};
use crate::robust::{
    solve_robust_ccg_with, solve_robust_with, worst_case_lp, worst_case_oracle, CcgOptions, RobustInstance,
    RobustOptions,
};
use crate::Result;

use instances::{bilevel_case, oracle_case, robust_from_oracle_case};

/// Tolerances of the suites.
pub const ORACLE_TOL: f64 = 1e-9;
pub const DUALITY_TOL: f64 = 1e-6;
pub const LINEARIZATION_TOL: f64 = 1e-9;
pub const OBJECTIVE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    /// Seeds `0..oracle_seeds` of the adversary family (and their robust versions).
    pub oracle_seeds: u64,
    /// Seeds `0..bilevel_seeds` of the small bilevel family.
    pub bilevel_seeds: u64,
    /// Solves the robust models with `M = factor · C̄` instead of `C̄`.
    pub big_m_factor: Option<f64>,
    pub threads: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { oracle_seeds: 200, bilevel_seeds: 50, big_m_factor: None, threads: default_threads() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub instances: usize,
    pub passed: usize,
    /// One line per failing instance.
    pub failures: Vec<String>,
}

impl SuiteReport {
    fn new(name: &str) -> Self {
        SuiteReport { name: name.to_string(), instances: 0, passed: 0, failures: Vec::new() }
    }

    fn record(&mut self, label: &str, outcome: std::result::Result<(), String>) {
        self.instances += 1;
        match outcome {
            Ok(()) => self.passed += 1,
            Err(why) => self.failures.push(format!("{label}: {why}")),
        }
    }

    pub fn all_passed(&self) -> bool {
        self.passed == self.instances
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suites: Vec<SuiteReport>,
    pub all_passed: bool,
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn oracle_check(seed: u64) -> std::result::Result<(), String> {
    let case = oracle_case(seed);
    let greedy = worst_case_oracle(&case.c, &case.ev, &case.grid, &case.set).map_err(|e| e.to_string())?;
    let lp = worst_case_lp(&case.c, &case.ev, &case.grid, &case.set).map_err(|e| e.to_string())?;
    if lp.max_fractionality > ORACLE_TOL {
        return Err(format!("LP vertex is fractional by {:e}", lp.max_fractionality));
    }
    let gap = relative(lp.energy_kwh, greedy.energy_kwh);
    if gap > ORACLE_TOL {
        return Err(format!("LP {} vs greedy {} (relative {gap:e})", lp.energy_kwh, greedy.energy_kwh));
    }
    Ok(())
}

struct RobustCheck {
    duality: std::result::Result<(), String>,
    linearization: std::result::Result<(), String>,
    ccg: std::result::Result<(), String>,
}

fn robust_check(inst: &RobustInstance, cfg: &VerifyConfig) -> RobustCheck {
    let opts = RobustOptions {
        threads: 1,
        big_m: cfg.big_m_factor.map(|f| f * inst.fleet[0].max_charge_kw),
        ..Default::default()
    };
    let milp = solve_robust_with(inst, &opts);
    let ccg = solve_robust_ccg_with(inst, &CcgOptions { threads: 1, ..Default::default() });
    let (milp, reference) = match (milp, ccg) {
        (Ok(m), Ok(c)) => (m, c.schedule.objective_eur),
        (Err(e), _) => {
            let why = format!("robust solve failed: {e}");
            return RobustCheck { duality: Err(why.clone()), linearization: Err(why.clone()), ccg: Err(why) };
        }
        (Ok(_), Err(e)) => {
            let why = format!("constraint generation failed: {e}");
            return RobustCheck { duality: Ok(()), linearization: Ok(()), ccg: Err(why) };
        }
    };
    let objective = milp.schedule.objective_eur;
    let agree = relative(objective, reference) <= OBJECTIVE_TOL;
    let duality = if milp.duality_residual <= DUALITY_TOL {
        Ok(())
    } else {
        Err(format!("strong-duality residual {:e}", milp.duality_residual))
    };
    let linearization = if milp.linearization_residual > LINEARIZATION_TOL {
        Err(format!("max |z - c·α| = {:e}", milp.linearization_residual))
    } else if !agree {
        // An undersized M keeps z = c·α but cuts off plans with c > M.
        Err(format!("objective {objective} differs from the constraint-generation optimum {reference}"))
    } else {
        Ok(())
    };
    let ccg = if agree {
        Ok(())
    } else {
        Err(format!("single-level {objective} vs constraint generation {reference}"))
    };
    RobustCheck { duality, linearization, ccg }
}

/// Runs the four suites: oracle equivalence, strong duality, linearization
/// exactness and constraint generation against the single-level MILP.
pub fn run_suites(cfg: &VerifyConfig) -> Result<VerifyReport> {
    let mut oracle = SuiteReport::new("oracle-equivalence");
    let checks = map_indexed(cfg.oracle_seeds as usize, cfg.threads, |i| oracle_check(i as u64));
    for (seed, outcome) in checks.into_iter().enumerate() {
        oracle.record(&format!("oracle seed {seed}"), outcome);
    }

    let mut labels = Vec::new();
    let mut family: Vec<RobustInstance> = Vec::new();
    for seed in 0..cfg.bilevel_seeds {
        labels.push(format!("bilevel seed {seed}"));
        family.push(bilevel_case(seed));
    }
    for seed in 0..cfg.oracle_seeds {
        labels.push(format!("robust oracle seed {seed}"));
        family.push(robust_from_oracle_case(seed));
    }
    let checks = map_indexed(family.len(), cfg.threads, |i| robust_check(&family[i], cfg));
    let mut duality = SuiteReport::new("strong-duality");
    let mut linearization = SuiteReport::new("linearization");
    let mut ccg = SuiteReport::new("ccg-vs-milp");
    for (label, check) in labels.iter().zip(checks) {
        duality.record(label, check.duality);
        linearization.record(label, check.linearization);
        ccg.record(label, check.ccg);
    }
    let suites = vec![oracle, duality, linearization, ccg];
    let all_passed = suites.iter().all(SuiteReport::all_passed);
    Ok(VerifyReport { suites, all_passed })
}
