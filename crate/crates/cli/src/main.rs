//! `degen-actuator`: batch runs of the minimum-norm control and actuator
//! placement pipelines from a JSON configuration.
//!
//! Exit codes: 0 success, 1 runtime or I/O failure, 2 failed verification
//! audit, 3 solver non-convergence, 4 configuration error.

// `!(x > 0.0)` guards reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod audit;
mod commands;
mod config;
mod record;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::{ConfigError, ExperimentConfig};
use record::{OutputDir, RunRecord};

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 4;

#[derive(Parser)]
#[command(
    name = "degen-actuator",
    version,
    about = "Minimum-norm controls and actuator placement for degenerate parabolic equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimum-norm control for a fixed initial state and actuator density.
    SolveControl(RunArgs),
    /// Worst-case optimal actuator density and its rounded support.
    OptimizeActuator(RunArgs),
    /// Worst-case value of the configured actuator density.
    GameValue(RunArgs),
    /// Runs the invariant audits and prints a pass/fail table.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration; omitted sections take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for `summary.json` and the CSV dumps.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides `solver.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 or unset uses every core.
    #[arg(long, env = "DEGEN_ACTUATOR_THREADS")]
    threads: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Perturbs the assembled operator before the audits (negative test).
    #[arg(long, hide = true)]
    break_symmetry: Option<f64>,
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.solver.seed = s;
    }
    Ok(cfg)
}

#[cfg(feature = "parallel")]
fn configure_threads(n: Option<usize>) -> Result<usize> {
    use anyhow::Context;
    if let Some(n) = n.filter(|&n| n > 0) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(rayon::current_num_threads())
}

#[cfg(not(feature = "parallel"))]
fn configure_threads(_: Option<usize>) -> Result<usize> {
    Ok(1)
}

type Pipeline =
    fn(&ExperimentConfig, &degen_actuator::Model, &mut RunRecord, &OutputDir) -> Result<i32>;

fn run(
    name: &'static str,
    args: &RunArgs,
    pipeline: Pipeline,
    break_symmetry: Option<f64>,
) -> Result<i32> {
    let cfg = load_config(args)?;
    let threads = configure_threads(args.threads)?;
    let mut model = cfg.model()?;
    if let Some(delta) = break_symmetry {
        let mut op = model.op.clone();
        op.break_symmetry_for_testing(delta);
        model = degen_actuator::Model::from_operator(model.grid.clone(), model.tg, op)?;
    }
    let out = OutputDir::create(&args.out)?;
    let mut rec = RunRecord::new(name, &cfg, threads);
    let code = pipeline(&cfg, &model, &mut rec, &out)?;
    rec.exit_code = code;
    out.finish(&mut rec)?;
    report(&rec, &args.out);
    Ok(code)
}

fn report(rec: &RunRecord, out: &Path) {
    if !rec.audits.is_empty() {
        for a in &rec.audits {
            println!(
                "{:<22} {}  measured {:>10.3e}  tol {:>8.1e}  {}",
                a.name,
                if a.passed { "PASS" } else { "FAIL" },
                a.measured,
                a.tolerance,
                a.anchor
            );
        }
    } else {
        for (k, v) in &rec.outputs {
            println!("{k} = {v}");
        }
    }
    for w in &rec.warnings {
        eprintln!("warning: {w}");
    }
    println!("summary written to {}", out.join("summary.json").display());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::SolveControl(a) => run("solve-control", a, commands::solve_control, None),
        Command::OptimizeActuator(a) => {
            run("optimize-actuator", a, commands::optimize_actuator, None)
        }
        Command::GameValue(a) => run("game-value", a, commands::game_value, None),
        Command::Verify(a) => run("verify", &a.run, commands::verify, a.break_symmetry),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<ConfigError>() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::from(EXIT_RUNTIME)
            }
        }
    }
}
