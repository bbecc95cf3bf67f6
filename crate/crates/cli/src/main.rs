//! `qdkr`: command-line driver for the kicked-rotor simulation laboratory.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical guard abort,
//! 4 partial sweep failure, 1 anything else.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kicked_rotor::ensemble::SweepAxis;

use commands::CliError;
use config::RunConfig;

#[derive(Parser)]
#[command(name = "qdkr", version, about = "Continuously observed quantum kicked rotor")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trajectory ensemble: per-kick ⟨p²⟩ series and diffusion fit.
    Quantum(Common),
    /// Classical standard-map ensemble with momentum noise.
    Classical(Common),
    /// Diffusion coefficient over `sweep.values` of k̄.
    SweepKbar(Common),
    /// Diffusion coefficient over `sweep.values` of D_env.
    SweepDenv(Common),
    /// κ_eff and early-time diffusion rate over a k̄ range.
    Analytic(Common),
    /// Classicality inequalities for the configured k̄, D_env and action.
    Check(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// Number of trajectories.
    #[arg(long)]
    traj: Option<usize>,
    /// Grid points.
    #[arg(long)]
    grid: Option<usize>,
    /// Substeps per kick period.
    #[arg(long)]
    substeps: Option<usize>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::from_toml("")?,
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.workers {
            cfg.workers = Some(v);
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if let Some(v) = self.traj {
            cfg.n_traj = v;
        }
        if let Some(v) = self.grid {
            cfg.sim.n_grid = v;
        }
        if let Some(v) = self.substeps {
            cfg.sim.n_sub = v;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Quantum(c) => commands::quantum(&c.resolve()?),
        Command::Classical(c) => commands::classical(&c.resolve()?),
        Command::SweepKbar(c) => commands::sweep_cmd(&c.resolve()?, SweepAxis::Kbar),
        Command::SweepDenv(c) => commands::sweep_cmd(&c.resolve()?, SweepAxis::DEnv),
        Command::Analytic(c) => commands::analytic(&c.resolve()?),
        Command::Check(c) => commands::check(&c.resolve()?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
