mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use qfridge::mpemba::UnitaryFamily;

use commands::Outcome;
use config::ExperimentConfig;

/// Relaxation and Mpemba experiments for the qubit–qutrit absorption refrigerator.
#[derive(Debug, Parser)]
#[command(name = "qfridge", version)]
struct Cli {
    /// JSON experiment configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config's `output_dir`).
    #[arg(long, global = true, env = "QFRIDGE_OUT")]
    out: Option<PathBuf>,
    /// Optimizer seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Switch off the cold bath (`κ_c = 0`).
    #[arg(long, global = true)]
    no_cold_bath: bool,
    /// Unitary family for the Mpemba search.
    #[arg(long, global = true)]
    family: Option<UnitaryFamily>,
    /// Steady-state trace-distance threshold.
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Liouvillian spectrum, biorthonormality check and steady state.
    Spectrum,
    /// Steady-state qubit cooling over a two-parameter grid.
    SteadySweep,
    /// Relaxation of the thermal initial state.
    Evolve,
    /// Optimize a Mpemba state and compare it with the thermal state.
    Mpemba,
    /// Mpemba and steady-state times over a two-parameter grid.
    TimingSweep,
    /// Print the resolved configuration.
    Config,
}

impl Cli {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.optimizer.seed = seed;
        }
        if self.no_cold_bath {
            cfg.model = cfg.model.without_cold_bath();
        }
        if let Some(family) = self.family {
            cfg.family = family;
        }
        if let Some(eps) = self.epsilon {
            cfg.thresholds.epsilon = eps;
        }
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &ExperimentConfig) -> PathBuf {
        self.out
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

fn run(cli: &Cli) -> Result<Outcome> {
    let cfg = cli.resolve()?;
    commands::check(&cfg)?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let out = cli.out_dir(&cfg);
    match cli.command {
        Command::Spectrum => commands::spectrum(&cfg, &out),
        Command::SteadySweep => commands::steady_sweep(&cfg, &out),
        Command::Evolve => commands::evolve(&cfg, &out),
        Command::Mpemba => commands::mpemba(&cfg, &out),
        Command::TimingSweep => commands::timing_sweep(&cfg, &out),
        Command::Config => {
            println!("{}", cfg.to_json());
            Ok(Outcome::Clean)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::Failed(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
