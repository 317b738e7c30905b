//! `evagg`: generate data, solve one day, evaluate a month, run self-checks.

mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use evagg::data::{day_ahead_instance, generate_history, load_history_csv, save_history_csv, GeneratorConfig};
use evagg::deterministic::build_deterministic;
use evagg::fleet::{DayRecord, EvParams};
use evagg::milp::{export_mps, MilpProblem};
use evagg::realtime::{evaluate_month, MethodSelector, MonthConfig};
use evagg::robust::{build_single_level_with, RobustInstance, RobustOptions, DEFAULT_PENALTY};
use evagg::verify::{run_suites, VerifyConfig};

#[derive(Parser, Debug)]
#[command(name = "evagg", version, about = "Day-ahead charging plans for an EV aggregator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic history (history.csv, prices.csv) and the config used.
    Generate(GenerateArgs),
    /// Forecast one day, solve it and write the schedules.
    Solve(SolveArgs),
    /// Rolling evaluation over every day with enough history.
    Month(MonthArgs),
    /// Run the self-check suites and write a JSON report.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Generator config (TOML); defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory with history.csv and prices.csv; generated from the config if absent.
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long, default_value = "both")]
    method: MethodSelector,
    #[arg(long, default_value_t = 4)]
    lookback: usize,
    /// Imbalance penalty in EUR/kWh.
    #[arg(long, default_value_t = DEFAULT_PENALTY)]
    penalty: f64,
    /// Relative optimality gap of the robust MILPs.
    #[arg(long, default_value_t = 0.0)]
    gap: f64,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Day index to plan; defaults to the last day of the history.
    #[arg(long)]
    day: Option<i64>,
    /// Comma-separated 1-based vehicle numbers; defaults to the whole fleet.
    #[arg(long, value_delimiter = ',')]
    vehicles: Option<Vec<usize>>,
    /// Also write the optimization models in MPS format here.
    #[arg(long)]
    dump_mps: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct MonthArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Comma-separated day indices; defaults to every day with enough history.
    #[arg(long, value_delimiter = ',')]
    days: Option<Vec<i64>>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, default_value_t = 200)]
    oracle_seeds: u64,
    #[arg(long, default_value_t = 50)]
    bilevel_seeds: u64,
    /// Solve the robust models with M = factor · C̄ (values below 1 are a deliberate fault).
    #[arg(long)]
    big_m_factor: Option<f64>,
    /// Directory for verify.json; the report is always printed.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate(a) => cmd_generate(&a).map(|()| true),
        Command::Solve(a) => cmd_solve(&a).map(|()| true),
        Command::Month(a) => cmd_month(&a).map(|()| true),
        Command::Verify(a) => cmd_verify(&a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_config(data: &DataArgs) -> Result<GeneratorConfig> {
    let mut cfg = match &data.config {
        Some(path) => GeneratorConfig::load(path).with_context(|| format!("reading {}", path.display()))?,
        None => GeneratorConfig::default(),
    };
    if let Some(seed) = data.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_history(data: &DataArgs, cfg: &GeneratorConfig) -> Result<Vec<DayRecord>> {
    match &data.history {
        Some(dir) => load_history_csv(dir.join("history.csv"), dir.join("prices.csv"))
            .with_context(|| format!("loading history from {}", dir.display())),
        None => Ok(generate_history(cfg)?),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn robust_options(model: &ModelArgs) -> Result<RobustOptions> {
    if !(0.0..1.0).contains(&model.gap) {
        bail!("--gap must lie in [0, 1)");
    }
    if !(model.penalty >= 0.0 && model.penalty.is_finite()) {
        bail!("--penalty must be a nonnegative number");
    }
    let mut opts = RobustOptions::default();
    opts.milp.gap_target = model.gap;
    Ok(opts)
}

fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    let cfg = load_config(&a.data)?;
    let history = generate_history(&cfg)?;
    create_dir(&a.out)?;
    save_history_csv(&history, a.out.join("history.csv"), a.out.join("prices.csv"))?;
    fs::write(a.out.join("config.toml"), cfg.to_toml_string())?;
    eprintln!(
        "wrote {} days x {} vehicles x {} periods to {}",
        history.len(),
        cfg.n_vehicles,
        cfg.n_periods,
        a.out.display()
    );
    Ok(())
}

/// Keeps the listed 1-based vehicles, in the given order.
fn select_vehicles(inst: RobustInstance, vehicles: &[usize]) -> Result<RobustInstance> {
    let n = inst.num_vehicles();
    for &v in vehicles {
        if v == 0 || v > n {
            bail!("vehicle {v} is outside 1..={n}");
        }
    }
    if vehicles.is_empty() {
        bail!("vehicle filter is empty");
    }
    let pick = |v: &usize| v - 1;
    Ok(RobustInstance {
        fleet: vehicles.iter().map(|v| inst.fleet[pick(v)]).collect(),
        grid: inst.grid,
        prices: inst.prices.clone(),
        forecasts: vehicles.iter().map(|v| inst.forecasts[pick(v)].clone()).collect(),
        uncertainty: vehicles.iter().map(|v| inst.uncertainty[pick(v)].clone()).collect(),
        penalty_eur_per_kwh: inst.penalty_eur_per_kwh,
    })
}

fn dump_models(dir: &Path, inst: &RobustInstance, vehicles: &[usize], selector: MethodSelector) -> Result<()> {
    create_dir(dir)?;
    for method in selector.methods() {
        match method {
            evagg::realtime::Method::Deterministic => {
                let lp = build_deterministic(inst)?;
                export_mps(&MilpProblem::new(lp, Vec::new()), dir.join("deterministic.mps"))?;
            }
            evagg::realtime::Method::Robust => {
                for (v, number) in vehicles.iter().enumerate() {
                    let (milp, _) = build_single_level_with(inst, v, None)?;
                    export_mps(&milp, dir.join(format!("robust_v{number}.mps")))?;
                }
            }
        }
    }
    Ok(())
}

fn cmd_solve(a: &SolveArgs) -> Result<()> {
    let cfg = load_config(&a.data)?;
    let opts = robust_options(&a.model)?;
    let history = load_history(&a.data, &cfg)?;
    let fleet: Vec<EvParams> = cfg.fleet();
    let day = match a.day {
        Some(d) => history.iter().find(|r| r.date_index == d).with_context(|| format!("day {d} is not in the history"))?,
        None => history.iter().max_by_key(|r| r.date_index).context("history is empty")?,
    };
    let mut inst = day_ahead_instance(
        &history,
        &fleet,
        cfg.grid()?,
        day.date_index,
        day.weekday,
        a.model.lookback,
        a.model.penalty,
    )?;
    let vehicles: Vec<usize> = match &a.vehicles {
        Some(list) => {
            inst = select_vehicles(inst, list)?;
            list.clone()
        }
        None => (1..=inst.num_vehicles()).collect(),
    };
    if let Some(dir) = &a.dump_mps {
        dump_models(dir, &inst, &vehicles, a.model.method)?;
    }
    create_dir(&a.out)?;
    let mut summaries = Vec::new();
    for method in a.model.method.methods() {
        let schedule = method.solve(&inst, &opts)?;
        let path = a.out.join(format!("schedule_{method}.csv"));
        report::write_schedule(&path, &schedule, &vehicles)?;
        let s = report::SolveSummary::new(method, &schedule, &inst);
        eprintln!("{method}: objective {:.6} EUR, C^DA {:.6} EUR", s.objective_eur, s.c_da_eur);
        summaries.push(s);
    }
    let doc = report::SolveReport {
        day: day.date_index,
        weekday: day.weekday,
        lookback: a.model.lookback,
        penalty_eur_per_kwh: a.model.penalty,
        vehicles: vehicles.len(),
        methods: summaries,
    };
    report::write_json(&a.out.join("solve_summary.json"), &doc)
}

fn cmd_month(a: &MonthArgs) -> Result<()> {
    let cfg = load_config(&a.data)?;
    let robust = robust_options(&a.model)?;
    let history = load_history(&a.data, &cfg)?;
    let month_cfg = MonthConfig {
        lookback: a.model.lookback,
        penalty_eur_per_kwh: a.model.penalty,
        methods: a.model.method,
        days: a.days.clone(),
        robust,
    };
    let report = evaluate_month(&history, &cfg.fleet(), cfg.grid()?, &month_cfg, |d| {
        eprintln!(
            "day {:>3} {:<13} C^DA {:>10.4} EUR  P^DA {:>10.3} kW  D^RT {:>9.4} kWh",
            d.day, d.method, d.metrics.c_da_eur, d.metrics.p_da_kw, d.metrics.d_rt_kwh
        )
    })?;
    create_dir(&a.out)?;
    report.write_metrics_csv(fs::File::create(a.out.join("metrics.csv"))?)?;
    report::write_daily_series(&a.out.join("purchased_per_day.csv"), &report, |m| m.p_da_kw)?;
    report::write_daily_series(&a.out.join("deviation_per_day.csv"), &report, |m| m.d_rt_kwh)?;
    report::write_json(&a.out.join("summary.json"), &report::MonthSummary::from(&report))?;
    for s in &report.summary {
        eprintln!(
            "{}: {} days, C^DA total {:.4} EUR, P^DA total {:.3} kW, D^RT total {:.4} kWh",
            s.method, s.days, s.c_da_eur.total, s.p_da_kw.total, s.d_rt_kwh.total
        );
    }
    Ok(())
}

fn cmd_verify(a: &VerifyArgs) -> Result<bool> {
    let cfg = VerifyConfig {
        oracle_seeds: a.oracle_seeds,
        bilevel_seeds: a.bilevel_seeds,
        big_m_factor: a.big_m_factor,
        ..Default::default()
    };
    let report = run_suites(&cfg)?;
    for s in &report.suites {
        let verdict = if s.all_passed() { "PASS" } else { "FAIL" };
        eprintln!("{verdict} {:<20} {}/{}", s.name, s.passed, s.instances);
        for f in s.failures.iter().take(5) {
            eprintln!("     {f}");
        }
    }
    let text = serde_json::to_string_pretty(&report)?;
    println!("{text}");
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        fs::write(dir.join("verify.json"), format!("{text}\n"))?;
    }
    Ok(report.all_passed)
}
