use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;
use lsrecovery_cli::config::load_json;
use lsrecovery_cli::{
    convergence, generate, grid, recover, ric, CliError, CliResult, ConvergenceConfig,
    GenerateConfig, GridConfig, RecoverConfig, RicProbeConfig,
};
use serde::de::DeserializeOwned;

#[derive(Parser)]
#[command(
    name = "lsrecovery",
    version,
    about = "Low-rank plus sparse recovery experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed (base seed for grids).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (phase-grid only; defaults to all cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic instance (x0, l0, s0 triples).
    Generate(Common),
    /// Run a phase-transition grid.
    PhaseGrid {
        #[command(flatten)]
        common: Common,
        /// Start from the full-resolution grid (m = n = 100, steps of 0.02).
        #[arg(long)]
        full_grid: bool,
    },
    /// Record error-versus-time traces for one instance.
    Convergence(Common),
    /// Measure and recover a matrix file.
    Recover(Common),
    /// Estimate isometry constants over sampling ratios.
    RicProbe(Common),
}

fn load_or<T: DeserializeOwned>(path: Option<&Path>, default: impl FnOnce() -> T) -> CliResult<T> {
    match path {
        Some(p) => load_json(p),
        None => Ok(default()),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate(c) => {
            let mut cfg: GenerateConfig = load_or(c.config.as_deref(), GenerateConfig::default)?;
            if let Some(seed) = c.seed {
                cfg.problem.seed = seed;
            }
            let files = generate::generate_files(&cfg, &c.out)?;
            println!(
                "wrote {} (r = {}, s = {})",
                files.x0.display(),
                files.r,
                files.s
            );
        }
        Command::PhaseGrid {
            common: c,
            full_grid,
        } => {
            let base = if full_grid {
                GridConfig::full_scale
            } else {
                GridConfig::default
            };
            let mut cfg: GridConfig = load_or(c.config.as_deref(), base)?;
            if let Some(seed) = c.seed {
                cfg.base_seed = seed;
            }
            let summary = grid::run_phase_grid(&cfg, &c.out, c.workers)?;
            for ratio in &summary.delta_star {
                let star = ratio
                    .delta_star
                    .map_or("none".to_string(), |d| d.to_string());
                println!(
                    "rho_r = {}, rho_s = {}: delta* = {star}",
                    ratio.rho_r, ratio.rho_s
                );
            }
        }
        Command::Convergence(c) => {
            let mut cfg: ConvergenceConfig =
                load_or(c.config.as_deref(), ConvergenceConfig::default)?;
            if let Some(seed) = c.seed {
                cfg.problem.seed = seed;
            }
            let rows = convergence::run_convergence(&cfg, &c.out)?;
            println!(
                "wrote {} rows to {}",
                rows.len(),
                c.out.join(convergence::CONVERGENCE_CSV).display()
            );
        }
        Command::Recover(c) => {
            let path = c
                .config
                .as_deref()
                .ok_or_else(|| CliError::Config("recover requires --config".into()))?;
            let mut cfg: RecoverConfig = load_json(path)?;
            if let Some(seed) = c.seed {
                cfg.operator.seed = seed;
            }
            let report = recover::recover_file(&cfg, &c.out)?;
            println!(
                "{}: relative error {:e}, {} iterations ({})",
                report.solver, report.rel_err_x, report.iterations, report.termination
            );
        }
        Command::RicProbe(c) => {
            let mut cfg: RicProbeConfig = load_or(c.config.as_deref(), RicProbeConfig::default)?;
            if let Some(seed) = c.seed {
                cfg.seed = seed;
            }
            for level in ric::run_ric_probe(&cfg, &c.out)? {
                println!(
                    "delta = {} (p = {}): delta_hat = {}",
                    level.delta, level.p, level.stats.delta_hat
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
