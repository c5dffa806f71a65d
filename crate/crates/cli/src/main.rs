//! `qlink` — feasibility workbench for quantum links over long lossy fibre.
//!
//! Grammar: `qlink <subcommand> --config <path> [--seed N] [--out DIR]`.
//! Exit codes: 0 on success, 2 for configuration and precondition
//! failures, 3 for unreadable or malformed input data files.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use config::ExperimentConfig;
use qlink_core::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "qlink", version, about = "Quantum-link feasibility workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Arguments shared by every subcommand.
#[derive(Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory (defaults to `out_dir` in the config, then `.`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Secret key rate at the configured fibre length.
    Skr {
        #[command(flatten)]
        common: Common,
    },
    /// Secret key rate versus fibre length (`fig5.csv`).
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Shortest length in km (overrides the config).
        #[arg(long, value_name = "KM")]
        lmin: Option<f64>,
        /// Longest length in km (overrides the config).
        #[arg(long, value_name = "KM")]
        lmax: Option<f64>,
        /// Grid step in km (overrides the config).
        #[arg(long, value_name = "KM")]
        step: Option<f64>,
    },
    /// Simulate a pair-source acquisition and analyze it.
    CoincSim {
        #[command(flatten)]
        common: Common,
        /// Seed (overrides the config `seed`).
        #[arg(long)]
        seed: Option<u64>,
        /// Acquisition length in seconds (overrides the config).
        #[arg(long, value_name = "S")]
        duration: Option<f64>,
        /// Histogram bin width in ps (overrides the config).
        #[arg(long, value_name = "PS")]
        bin_width: Option<u64>,
    },
    /// Histogram and CAR analysis of a recorded tag file.
    CoincAnalyze {
        #[command(flatten)]
        common: Common,
        /// Time-tag file, binary `.qtt` or `channel,timestamp_ps` CSV.
        #[arg(long, value_name = "PATH")]
        tags: PathBuf,
        /// Histogram bin width in ps (overrides the config).
        #[arg(long, value_name = "PS")]
        bin_width: Option<u64>,
    },
    /// Synthesize interferometric phase noise and analyze its PSD.
    PhaseSim {
        #[command(flatten)]
        common: Common,
        /// Seed (overrides the config `seed`).
        #[arg(long)]
        seed: Option<u64>,
        /// Record length in seconds (overrides the config).
        #[arg(long, value_name = "S")]
        duration: Option<f64>,
    },
    /// PSD and tone analysis of a recorded interferometer trace.
    PhaseAnalyze {
        #[command(flatten)]
        common: Common,
        /// Two-detector trace CSV (`time_s,det_a,det_b`).
        #[arg(long, value_name = "PATH")]
        trace: PathBuf,
    },
    /// Simulate polarization drift on the Poincaré sphere.
    PolDrift {
        #[command(flatten)]
        common: Common,
        /// Seed (overrides the config `seed`).
        #[arg(long)]
        seed: Option<u64>,
        /// Run length in seconds (overrides the config).
        #[arg(long, value_name = "S")]
        duration: Option<f64>,
    },
    /// Batch of quantized-EPC alignment trials.
    PolAlign {
        #[command(flatten)]
        common: Common,
        /// Seed (overrides the config `seed`).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit free model parameters to named observables.
    Calibrate {
        #[command(flatten)]
        common: Common,
    },
}

fn run(cli: Cli) -> qlink_core::Result<()> {
    match cli.command {
        Command::Skr { common } => {
            let cfg = ExperimentConfig::load(&common.config)?;
            commands::cmd_skr(&cfg, common.out)
        }
        Command::Sweep {
            common,
            lmin,
            lmax,
            step,
        } => {
            let cfg = ExperimentConfig::load(&common.config)?;
            commands::cmd_sweep(&cfg, common.out, lmin, lmax, step)
        }
        Command::CoincSim {
            common,
            seed,
            duration,
            bin_width,
        } => {
            let cfg = ExperimentConfig::load(&common.config)?;
            commands::cmd_coinc_sim(&cfg, common.out, seed, duration, bin_width)
        }
        Command::CoincAnalyze {
            common,
            tags,
            bin_width,
        } => {
            let cfg = ExperimentConfig::load(&common.config)?;
            commands::cmd_coinc_analyze(&cfg, common.out, &tags, bin_width)
        }
        Command::PhaseSim {
            common,
            seed,
            duration,
        } => {
            let cfg = ExperimentConfig::load(&common.config)?;
            commands::cmd_phase_sim(&cfg, common.out, seed, duration)
        }
        Command::PhaseAnalyze { common, trace } => {
            let cfg = ExperimentConfig::load(&common.config)?;
            commands::cmd_phase_analyze(&cfg, common.out, &trace)
        }
        Command::PolDrift {
            common,
            seed,
            duration,
        } => {
            let cfg = ExperimentConfig::load(&common.config)?;
            commands::cmd_pol_drift(&cfg, common.out, seed, duration)
        }
        Command::PolAlign { common, seed } => {
            let cfg = ExperimentConfig::load(&common.config)?;
            commands::cmd_pol_align(&cfg, common.out, seed)
        }
        Command::Calibrate { common } => {
            let cfg = ExperimentConfig::load(&common.config)?;
            commands::cmd_calibrate(&cfg, common.out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Domain(_) => ExitCode::from(2),
                Error::Format(_) | Error::Io(_) => ExitCode::from(3),
            }
        }
    }
}
