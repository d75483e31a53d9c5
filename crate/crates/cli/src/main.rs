mod manifest;
mod stages;
mod thresholds;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dampwave::model::RunConfig;

use crate::stages::{fit_trace, run_stages, Stage};
use crate::thresholds::Thresholds;

/// Quasimode, resolvent and energy-decay experiments for the damped wave
/// equation with polynomially vanishing strip damping.
#[derive(Debug, Parser)]
#[command(name = "dampwave", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for CSV files, manifest.json and summary.txt.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Replace the damping exponent from the configuration.
    #[arg(long, global = true)]
    beta_override: Option<f64>,

    /// TOML file with pass/fail tolerances.
    #[arg(long, global = true)]
    tolerance_file: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Half-line solution at eta = 0.
    CapSolve,
    /// Lowest Neumann level of -d^2/dx^2 + x^beta.
    Neumann,
    /// Eigenvalues for the configured m and the scaling sweep.
    EigenSweep,
    /// Quasimodes, tail mass and frequency placement.
    QuasimodeSweep,
    /// Real-axis resolvent growth.
    ResolventScan,
    /// Quasimode energy decay and the W = 0 and uniform-damping controls.
    Evolve,
    /// Fit an energy trace CSV (columns t, energy).
    Fit {
        trace: PathBuf,
    },
    /// Every stage in order.
    VerifyAll,
}

fn load(cli: &Cli) -> Result<(RunConfig, Thresholds), String> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(|e| format!("{}: {e}", path.display()))?,
        None => RunConfig::default(),
    };
    if let Some(beta) = cli.beta_override {
        cfg = cfg.with_beta(beta);
        cfg.validate().map_err(|e| e.to_string())?;
    }
    let thresholds = match &cli.tolerance_file {
        Some(path) => Thresholds::load(path)?,
        None => Thresholds::default(),
    };
    Ok((cfg, thresholds))
}

fn run(cli: &Cli) -> Result<bool, String> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    let (cfg, thresholds) = load(cli)?;
    std::fs::create_dir_all(&cli.out_dir).map_err(|e| format!("{}: {e}", cli.out_dir.display()))?;

    let stages: Vec<Stage> = match &cli.command {
        Command::Fit { trace } => {
            let (text, path) = fit_trace(trace, &cli.out_dir).map_err(|e| e.to_string())?;
            print!("{text}");
            eprintln!("wrote {}", path.display());
            return Ok(true);
        }
        Command::CapSolve => vec![Stage::CapSolve],
        Command::Neumann => vec![Stage::Neumann],
        Command::EigenSweep => vec![Stage::EigenSweep],
        Command::QuasimodeSweep => vec![Stage::QuasimodeSweep],
        Command::ResolventScan => vec![Stage::ResolventScan],
        Command::Evolve => vec![Stage::Evolve],
        Command::VerifyAll => Stage::ALL.to_vec(),
    };
    let manifest = run_stages(&cfg, &thresholds, &cli.out_dir, &stages);
    manifest.write(&cli.out_dir).map_err(|e| e.to_string())?;
    print!("{}", manifest.summary());
    if let Some((stage, msg)) = &manifest.failure {
        return Err(format!("stage {stage} failed: {msg}"));
    }
    Ok(manifest.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
