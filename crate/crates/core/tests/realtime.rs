mod common;

use evagg::data::{day_ahead_instance, generate_history, GeneratorConfig};
use evagg::fleet::{DayRecord, EvParams, ForecastInputs, PriceSeries, ScheduleSolution, TimeGrid, UncertaintySet, Weekday};
use evagg::realtime::{
    evaluate_day, evaluate_month, simulate_realtime, Method, MethodSelector, MonthConfig, RealtimeOutcome, CAP_TOL,
};
use evagg::robust::{solve_robust_with, RobustInstance, RobustOptions};
use evagg::verify::instances::fleet_case;
use evagg::Error;
use proptest::prelude::*;

use common::certain_instance;

fn plan(charge: Vec<Vec<f64>>) -> ScheduleSolution {
    ScheduleSolution { charge_kw: charge, ..Default::default() }
}

fn record(alpha: Vec<Vec<bool>>, xi: Vec<Vec<f64>>, prices: Vec<f64>) -> DayRecord {
    DayRecord { date_index: 0, weekday: Weekday::Monday, realized_alpha: alpha, realized_xi_kwh: xi, prices: PriceSeries::new(prices) }
}

fn check_outcome(inst: &RobustInstance, schedule: &ScheduleSolution, realized: &DayRecord, out: &RealtimeOutcome) {
    let purchased = schedule.purchased_kw();
    assert!(out.cap_residual(&purchased) <= CAP_TOL);
    let mut d_rt = 0.0;
    for (v, ev) in inst.fleet.iter().enumerate() {
        for t in 0..inst.grid.n_periods {
            let a = out.allocation_kw[v][t];
            let cap = if realized.realized_alpha[v][t] { ev.max_charge_kw } else { 0.0 };
            assert!(a >= -CAP_TOL && a <= cap + CAP_TOL, "vehicle {v} period {t}: {a} vs {cap}");
            d_rt += out.slack_pos_kwh[v][t] + out.slack_neg_kwh[v][t];
        }
    }
    assert!((d_rt - out.d_rt_kwh).abs() <= 1e-9 * d_rt.max(1.0));
    assert!((out.penalty_cost_eur - inst.penalty_eur_per_kwh * out.d_rt_kwh).abs() <= 1e-9 * out.penalty_cost_eur.max(1.0));
}

/// Two vehicles, three hourly periods, unit efficiency, 4 kW chargers.
/// The plan bought 2 kW in each of the first two periods for vehicle 1,
/// which then stays away; vehicle 2 is home for those periods and drives
/// 5 kWh in the last one. All 4 kWh bought must go to vehicle 2 and the
/// remaining 1 kWh is a deviation.
#[test]
fn purchase_moves_to_the_vehicle_that_is_home() {
    let ev = EvParams { max_charge_kw: 4.0, efficiency: 1.0, ..EvParams::reference() };
    let grid = TimeGrid::new(3, 1.0).unwrap();
    let inst = RobustInstance {
        fleet: vec![ev, ev],
        grid,
        prices: PriceSeries::new(vec![0.1; 3]),
        forecasts: vec![ForecastInputs { alpha_hat: vec![1.0; 3], xi_hat_kwh: vec![0.0; 3] }; 2],
        uncertainty: vec![UncertaintySet::free(3, 0); 2],
        penalty_eur_per_kwh: 1000.0,
    };
    let schedule = plan(vec![vec![2.0, 2.0, 0.0], vec![0.0; 3]]);
    let realized = record(
        vec![vec![false; 3], vec![true, true, false]],
        vec![vec![0.0; 3], vec![0.0, 0.0, 5.0]],
        vec![0.1; 3],
    );
    let out = simulate_realtime(&schedule, &realized, &inst).unwrap();
    check_outcome(&inst, &schedule, &realized, &out);
    assert_eq!(out.allocation_kw[0], vec![0.0; 3]);
    assert!((out.allocation_kw[1][0] - 2.0).abs() < 1e-9 && (out.allocation_kw[1][1] - 2.0).abs() < 1e-9);
    assert!((out.d_rt_kwh - 1.0).abs() < 1e-9);
    assert!((out.penalty_cost_eur - 1000.0).abs() < 1e-6);
}

#[test]
fn nothing_bought_means_everything_deviates() {
    let inst = fleet_case(2, 2, 24);
    let n = inst.grid.n_periods;
    let alpha: Vec<Vec<bool>> = inst.uncertainty.iter().map(|u| u.alpha_lo.clone()).collect();
    let xi: Vec<Vec<f64>> = inst.forecasts.iter().map(|f| f.xi_hat_kwh.clone()).collect();
    let realized = record(alpha, xi.clone(), inst.prices.eur_per_kwh.clone());
    let schedule = plan(vec![vec![0.0; n]; 2]);
    let out = simulate_realtime(&schedule, &realized, &inst).unwrap();
    check_outcome(&inst, &schedule, &realized, &out);
    let total: f64 = xi.iter().flatten().sum();
    assert!((out.d_rt_kwh - total).abs() < 1e-9, "{} vs {total}", out.d_rt_kwh);
}

#[test]
fn perfect_foresight_day_has_no_deviation() {
    let inst = certain_instance(5, 6, 48);
    let realized = record(
        inst.uncertainty.iter().map(|u| u.alpha_hi.clone()).collect(),
        inst.forecasts.iter().map(|f| f.xi_hat_kwh.clone()).collect(),
        inst.prices.eur_per_kwh.clone(),
    );
    let opts = RobustOptions { threads: 1, ..Default::default() };
    for method in [Method::Deterministic, Method::Robust] {
        let eval = evaluate_day(&inst, method, &realized, &opts).unwrap();
        check_outcome(&inst, &eval.schedule, &realized, &eval.outcome);
        assert!(eval.metrics.d_rt_kwh <= 1e-6, "{method}: {}", eval.metrics.d_rt_kwh);
    }
}

#[test]
fn day_metrics_match_recomputation() {
    let cfg = GeneratorConfig { seed: 4, n_vehicles: 8, n_days: 30, ..Default::default() };
    let history = generate_history(&cfg).unwrap();
    let day = history.last().unwrap();
    let inst = day_ahead_instance(&history, &cfg.fleet(), cfg.grid().unwrap(), day.date_index, day.weekday, 4, 1000.0).unwrap();
    let opts = RobustOptions { threads: 1, ..Default::default() };
    for method in [Method::Deterministic, Method::Robust] {
        let eval = evaluate_day(&inst, method, day, &opts).unwrap();
        check_outcome(&inst, &eval.schedule, day, &eval.outcome);
        let (mut c_da, mut p_da, mut d_rt) = (0.0, 0.0, 0.0);
        for v in 0..cfg.n_vehicles {
            for t in 0..cfg.n_periods {
                let c = eval.schedule.charge_kw[v][t];
                c_da += inst.prices.eur_per_kwh[t] * c * cfg.dt_hours;
                p_da += c;
                d_rt += eval.outcome.slack_pos_kwh[v][t] + eval.outcome.slack_neg_kwh[v][t];
            }
        }
        assert!((eval.metrics.c_da_eur - c_da).abs() <= 1e-9 * c_da.max(1.0));
        assert!((eval.metrics.p_da_kw - p_da).abs() <= 1e-9 * p_da.max(1.0));
        assert!((eval.metrics.d_rt_kwh - d_rt).abs() <= 1e-9 * d_rt.max(1.0));
    }
}

#[test]
fn month_aggregates_fold_the_days() {
    let cfg = GeneratorConfig { seed: 9, n_vehicles: 5, n_days: 36, ..Default::default() };
    let history = generate_history(&cfg).unwrap();
    let mut seen = 0;
    let report = evaluate_month(&history, &cfg.fleet(), cfg.grid().unwrap(), &MonthConfig::default(), |_| seen += 1).unwrap();
    assert_eq!(seen, report.days.len());
    assert_eq!(report.days.len(), 2 * 8);
    for s in &report.summary {
        let xs: Vec<f64> = report.days.iter().filter(|d| d.method == s.method).map(|d| d.metrics.d_rt_kwh).collect();
        let total: f64 = xs.iter().sum();
        assert_eq!(s.days, xs.len());
        assert_eq!(s.d_rt_kwh.total, total);
        assert_eq!(s.d_rt_kwh.mean, total / xs.len() as f64);
        assert_eq!(s.d_rt_kwh.max, xs.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        assert_eq!(s.d_rt_kwh.min, xs.iter().copied().fold(f64::INFINITY, f64::min));
        let c_total: f64 = report.days.iter().filter(|d| d.method == s.method).map(|d| d.metrics.c_da_eur).sum();
        assert_eq!(s.c_da_eur.total, c_total);
    }
}

#[test]
fn month_filters_are_checked() {
    let cfg = GeneratorConfig { seed: 9, n_vehicles: 3, n_days: 36, ..Default::default() };
    let history = generate_history(&cfg).unwrap();
    let grid = cfg.grid().unwrap();
    let run = |days: Option<Vec<i64>>, methods| {
        let mc = MonthConfig { days, methods, ..Default::default() };
        evaluate_month(&history, &cfg.fleet(), grid, &mc, |_| {})
    };
    assert!(matches!(run(Some(vec![]), MethodSelector::Both), Err(Error::Config(_))));
    assert!(matches!(run(Some(vec![400]), MethodSelector::Both), Err(Error::Config(_))));
    assert!(matches!(run(Some(vec![3]), MethodSelector::Both), Err(Error::InsufficientHistory(_))));
    let one = run(Some(vec![35]), MethodSelector::Robust).unwrap();
    assert_eq!(one.days.len(), 1);
    assert_eq!(one.days[0].method, Method::Robust);
    let short = GeneratorConfig { n_days: 20, ..cfg.clone() };
    let history = generate_history(&short).unwrap();
    assert!(matches!(
        evaluate_month(&history, &short.fleet(), grid, &MonthConfig::default(), |_| {}),
        Err(Error::InsufficientHistory(_))
    ));
}

#[test]
fn repeating_days_leave_no_surprise() {
    let inst = certain_instance(8, 4, 96);
    let alpha: Vec<Vec<bool>> = inst.uncertainty.iter().map(|u| u.alpha_hi.clone()).collect();
    let xi: Vec<Vec<f64>> = inst.forecasts.iter().map(|f| f.xi_hat_kwh.clone()).collect();
    let history: Vec<DayRecord> = (0..36)
        .map(|d| DayRecord {
            date_index: d,
            weekday: Weekday::Monday.offset(d),
            realized_alpha: alpha.clone(),
            realized_xi_kwh: xi.clone(),
            prices: inst.prices.clone(),
        })
        .collect();
    let report = evaluate_month(&history, &inst.fleet, inst.grid, &MonthConfig::default(), |_| {}).unwrap();
    let ro = report.summary_for(Method::Robust).unwrap();
    let det = report.summary_for(Method::Deterministic).unwrap();
    assert!(ro.d_rt_kwh.total <= 1e-6 && det.d_rt_kwh.total <= 1e-6);
    assert!(ro.c_da_eur.total >= det.c_da_eur.total - 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    /// Realizing the adversary's own pattern cannot hurt a slack-free robust plan.
    #[test]
    fn worst_case_realization_is_covered(seed in 0u64..10_000) {
        let mut inst = fleet_case(seed, 3, 32);
        for v in 0..3 {
            let hi = inst.uncertainty[v].alpha_hi.clone();
            let total: f64 = inst.forecasts[v].xi_hat_kwh.iter().sum();
            let away = hi.iter().filter(|&&a| !a).count() as f64;
            inst.forecasts[v].xi_hat_kwh = hi.iter().map(|&a| if a { 0.0 } else { total / away }).collect();
        }
        let s = solve_robust_with(&inst, &RobustOptions { threads: 1, ..Default::default() }).unwrap().schedule;
        let slack: f64 = s.slack_pos_kwh.iter().chain(&s.slack_neg_kwh).flatten().sum();
        prop_assume!(slack <= 1e-9);
        let realized = record(
            s.wc_alpha.clone(),
            inst.forecasts.iter().map(|f| f.xi_hat_kwh.clone()).collect(),
            inst.prices.eur_per_kwh.clone(),
        );
        let out = simulate_realtime(&s, &realized, &inst).unwrap();
        check_outcome(&inst, &s, &realized, &out);
        prop_assert!(out.d_rt_kwh <= 1e-6, "{}", out.d_rt_kwh);
    }
}
