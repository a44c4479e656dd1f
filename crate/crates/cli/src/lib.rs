//! Batch front end: load a run configuration, dispatch a subcommand and
//! write CSV or JSON.

pub mod checks;
pub mod config;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use biocontrol_core::model::ImpulseParams;
use biocontrol_core::periodic::PeriodicSolution;
use biocontrol_core::sim::{default_dt, detect_extinction, fmt_f64, simulate_with, SimOptions, State};
use biocontrol_core::stability::{budget_curve, classify};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use config::{ConfigError, ParamNeeds, RawConfig};

#[derive(Debug, Parser)]
#[command(name = "biocontrol", version, about = "Impulsive predator-prey crop protection model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the impulsive system; writes a `t,x,y,event` trace.
    Simulate(RunArgs),
    /// Sample the pest-free periodic solution over one period.
    Periodic(RunArgs),
    /// Minimal budgets and stability class as JSON.
    Budget(RunArgs),
    /// Budget thresholds across release-to-harvest period ratios.
    Sweep(RunArgs),
    /// Run the built-in numerical checks.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output file; defaults to `[output] path`, then stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Reserved; these subcommands are deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Also screen the configured response model.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for the random parameter draws.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Runtime(String),
    #[error("{failed} of {total} checks failed")]
    VerifyFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Config(_) => 2,
            CliError::VerifyFailed { .. } => 3,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Runtime(format!("{}: {e}", p.display()))),
        None => std::io::stdout().lock().write_all(text.as_bytes()).map_err(runtime),
    }
}

fn output_path(raw: &RawConfig, out: &Option<PathBuf>) -> Option<PathBuf> {
    out.clone().or_else(|| raw.opt_str("output", "path").map(PathBuf::from))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => simulate(&args),
        Command::Periodic(args) => periodic(&args),
        Command::Budget(args) => budget(&args),
        Command::Sweep(args) => sweep(&args),
        Command::Verify(args) => verify(&args),
    }
}

fn simulate(args: &RunArgs) -> Result<(), CliError> {
    let raw = RawConfig::load(&args.config)?;
    let model = config::response_model(&raw)?;
    let params = config::impulse_params(&raw, ParamNeeds::Full)?;
    let sim = config::sim_settings(&raw)?;
    let dt = sim.dt.unwrap_or_else(|| default_dt(&params));
    let trace = simulate_with(
        &model,
        &params,
        State::new(sim.x0, sim.y0),
        sim.t_end,
        dt,
        SimOptions { sample_stride: sim.sample_stride },
    )
    .map_err(runtime)?;
    if trace.clamped > 0 {
        eprintln!(
            "warning: clamped {} negative states to 0, first at t={}",
            trace.clamped,
            trace.first_clamp.unwrap_or(f64::NAN)
        );
    }
    if let Some((threshold, hold)) = sim.extinction {
        match detect_extinction(&trace, threshold, hold).map_err(runtime)? {
            Some(t) => eprintln!("extinction: x < {threshold} from t={t}"),
            None => eprintln!("extinction: none detected (threshold {threshold}, hold {hold})"),
        }
    }
    write_output(output_path(&raw, &args.out).as_deref(), &trace.to_csv())
}

#[derive(Serialize)]
struct PeriodicSummary<'a> {
    regime: &'a str,
    k: u32,
    y_star: f64,
    integral: f64,
    period: f64,
}

fn periodic(args: &RunArgs) -> Result<(), CliError> {
    let raw = RawConfig::load(&args.config)?;
    let params: ImpulseParams = config::impulse_params(&raw, ParamNeeds::Full)?;
    let samples = raw.opt_usize("output", "samples")?.unwrap_or(200).max(1);
    let sol = PeriodicSolution::new(&params).map_err(runtime)?;
    let period = sol.period();
    let mut csv = String::from("t,y\n");
    for i in 0..=samples {
        let t = period * i as f64 / samples as f64;
        let y = sol.eval(t).map_err(runtime)?;
        let _ = writeln!(csv, "{},{}", fmt_f64(t), fmt_f64(y));
    }
    let csv_path = output_path(&raw, &args.out);
    write_output(csv_path.as_deref(), &csv)?;

    let summary = PeriodicSummary {
        regime: sol.regime.name(),
        k: sol.regime.k().unwrap_or(0),
        y_star: sol.y_star,
        integral: sol.integral(),
        period,
    };
    let json = serde_json::to_string_pretty(&summary).map_err(runtime)? + "\n";
    match (raw.opt_str("output", "json"), csv_path) {
        (Some(p), _) => write_output(Some(Path::new(p)), &json),
        (None, Some(_)) => write_output(None, &json),
        (None, None) => {
            eprint!("{json}");
            Ok(())
        }
    }
}

fn budget(args: &RunArgs) -> Result<(), CliError> {
    let raw = RawConfig::load(&args.config)?;
    let model = config::response_model(&raw)?;
    let params = config::impulse_params(&raw, ParamNeeds::Full)?;
    let report = classify(&model, &params).map_err(runtime)?;
    let json = serde_json::to_string_pretty(&report).map_err(runtime)? + "\n";
    write_output(output_path(&raw, &args.out).as_deref(), &json)
}

fn sweep(args: &RunArgs) -> Result<(), CliError> {
    let raw = RawConfig::load(&args.config)?;
    let model = config::response_model(&raw)?;
    let params = config::impulse_params(&raw, ParamNeeds::Schedule)?;
    let ratios = config::sweep_ratios(&raw)?;
    let rows = budget_curve(&model, &params, &ratios).map_err(runtime)?;
    let mut csv = String::from("ratio,k,regime,mu_local,mu_global,trivial\n");
    for row in rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            fmt_f64(row.ratio.value()),
            row.ratio.k(),
            row.regime.name(),
            fmt_f64(row.mu_local),
            fmt_f64(row.mu_global),
            row.trivial
        );
    }
    write_output(output_path(&raw, &args.out).as_deref(), &csv)
}

fn verify(args: &VerifyArgs) -> Result<(), CliError> {
    let user = match &args.config {
        Some(path) => {
            let raw = RawConfig::load(path)?;
            Some(config::response_model(&raw)?)
        }
        None => None,
    };
    let outcomes = checks::verify_suite(args.seed.unwrap_or(checks::DEFAULT_SEED), user.as_ref());
    let mut report = String::new();
    for outcome in &outcomes {
        let _ = writeln!(report, "{outcome}");
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    let _ = writeln!(report, "{} of {} checks passed", outcomes.len() - failed, outcomes.len());
    write_output(args.out.as_deref(), &report)?;
    if failed > 0 {
        return Err(CliError::VerifyFailed { failed, total: outcomes.len() });
    }
    Ok(())
}
