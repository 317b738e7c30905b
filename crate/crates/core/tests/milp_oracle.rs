//! Branch-and-bound against enumeration of all binary fixings, and MPS round trips.

mod common;

use common::enumerate_fixings as enumerate;
use evagg::lp::{LpProblem, Relation};
use evagg::milp::{export_mps, import_mps, parse_mps, solve_milp, write_mps, MilpProblem, MilpStatus};
use proptest::prelude::*;

fn milp_strategy() -> impl Strategy<Value = MilpProblem> {
    (1usize..=8, 0usize..=4, 1usize..=5).prop_flat_map(|(k, n_cont, m)| {
        let n = k + n_cont;
        (
            prop::collection::vec(-6i32..=6, n),
            prop::collection::vec((prop::collection::vec(-4i32..=4, n), 0u8..3, -4i32..=8), m),
        )
            .prop_map(move |(costs, rows)| {
                let mut lp = LpProblem::new();
                let mut bins = Vec::new();
                for (j, &c) in costs.iter().enumerate() {
                    if j < k {
                        bins.push(lp.add_var(format!("b{j}"), c as f64, 0.0, 1.0));
                    } else {
                        lp.add_var(format!("x{j}"), c as f64, -1.0, 2.5);
                    }
                }
                for (i, (a, rel, b)) in rows.iter().enumerate() {
                    let rel = match rel {
                        0 => Relation::Le,
                        1 => Relation::Ge,
                        _ => Relation::Eq,
                    };
                    let rhs = *b as f64 / 2.0;
                    lp.add_row(format!("r{i}"), a.iter().enumerate().map(|(j, &v)| (j, v as f64)), rel, rhs);
                }
                MilpProblem::new(lp, bins)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matches_enumeration_of_fixings(p in milp_strategy()) {
        let s = solve_milp(&p, 0.0, usize::MAX).unwrap();
        let k = p.binaries.len() as u32;
        prop_assert!(s.nodes <= (1usize << (k + 1)) - 1, "{} nodes for {} binaries", s.nodes, k);
        match enumerate(&p) {
            None => prop_assert_eq!(s.status, MilpStatus::Infeasible),
            Some(best) => {
                prop_assert_eq!(s.status, MilpStatus::Optimal);
                prop_assert!((s.objective - best).abs() <= 1e-6, "{} vs {}", s.objective, best);
                for &j in &p.binaries {
                    prop_assert!(s.x[j] == 0.0 || s.x[j] == 1.0, "binary value {}", s.x[j]);
                }
                prop_assert!(p.lp.max_violation(&s.x) <= 1e-7);
                prop_assert_eq!(s.gap, 0.0);
            }
        }
    }

    #[test]
    fn mps_round_trip(p in milp_strategy()) {
        let text = write_mps(&p, "RAND").unwrap();
        prop_assert_eq!(parse_mps(&text).unwrap(), p);
    }
}

#[test]
fn twelve_binary_instance_matches_enumeration() {
    // Deterministic assignment-like instance with 12 binaries and coupling.
    let mut lp = LpProblem::new();
    let costs = [3.0, -1.0, 4.0, -1.5, 5.0, -9.0, 2.0, -6.0, 5.0, -3.0, 5.0, -8.0];
    let b: Vec<usize> = costs.iter().enumerate().map(|(j, &c)| lp.add_var(format!("b{j}"), c, 0.0, 1.0)).collect();
    let y = lp.add_var("y", 0.5, 0.0, 10.0);
    for g in 0..4 {
        lp.add_row(format!("g{g}"), (0..3).map(|i| (b[3 * g + i], 1.0)), Relation::Le, 1.0);
    }
    lp.add_row("w", b.iter().enumerate().map(|(i, &j)| (j, 1.0 + (i % 5) as f64)).chain([(y, -1.0)]), Relation::Le, 6.0);
    lp.add_row("cover", [(b[0], 1.0), (b[4], 1.0), (b[8], 1.0), (y, 0.25)], Relation::Ge, 1.0);
    let p = MilpProblem::new(lp, b);
    let s = solve_milp(&p, 0.0, usize::MAX).unwrap();
    let best = enumerate(&p).unwrap();
    assert_eq!(s.status, MilpStatus::Optimal);
    assert!((s.objective - best).abs() <= 1e-6, "{} vs {best}", s.objective);
}

#[test]
fn export_import_through_a_file() {
    let mut lp = LpProblem::new();
    let x = lp.add_var("x", 1.0, 0.0, 7.4);
    let a = lp.add_var("a", 0.0, 0.0, 1.0);
    lp.add_row("cap", [(x, 1.0), (a, -7.4)], Relation::Le, 0.0);
    let p = MilpProblem::new(lp, vec![a]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("toy.mps");
    export_mps(&p, &path).unwrap();
    assert_eq!(import_mps(&path).unwrap(), p);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("NAME          toy\n"));
    assert!(import_mps(dir.path().join("missing.mps")).is_err());
}
