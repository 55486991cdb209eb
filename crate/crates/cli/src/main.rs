//! Experiment runner for the oamqkd toolkit.
//!
//! Exit codes: 0 success (and protocol accepted), 2 protocol abort (QBER at
//! or above threshold), 1 operational error. Scripts can distinguish
//! "no secure key is possible" from "the tool failed".

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{resolve_seed, ExperimentConfig};
use output::OutDir;

#[derive(Parser)]
#[command(
    name = "oamqkd",
    version,
    about = "Twisted-photon QKD channel simulation and analysis"
)]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// RNG seed; required for stochastic runs, overrides [run].seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory; created if missing.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Retrieve and decompose turbulence screens from recorded frames.
    Characterize {
        /// Directory of 8/16-bit grayscale PGM or PNG frames.
        #[arg(long)]
        frames: PathBuf,
        /// Dark level to subtract, in normalized [0, 1] units.
        #[arg(long)]
        dark_level: Option<f64>,
        /// Highest Zernike index to fit.
        #[arg(long)]
        max_j: Option<u32>,
    },
    /// Cross-talk matrix of the turbulent channel over an OAM range.
    SimulateChannel,
    /// Evaluate a key-distribution protocol over the channel.
    RunProtocol,
    /// Reconstruct the channel process matrix from three-basis data.
    Tomography,
    /// Track phase singularities through a screen sequence.
    VortexTrack,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::ProtocolAbort) => {
            eprintln!("protocol aborted: QBER at or above the threshold; no secret key");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

enum Outcome {
    Success,
    ProtocolAbort,
}

fn dispatch(cli: Cli) -> anyhow::Result<Outcome> {
    configure_threads(cli.threads)?;
    let config_path = cli
        .config
        .ok_or_else(|| anyhow::anyhow!("--config PATH is required"))?;
    let config = ExperimentConfig::load(&config_path)?;
    let out_path = cli.out.ok_or_else(|| anyhow::anyhow!("--out DIR is required"))?;
    let out = OutDir::create(&out_path)?;

    match cli.command {
        Command::Characterize { frames, dark_level, max_j } => {
            out.write_resolved_config(&config, cli.seed)?;
            commands::characterize::run(&config, &frames, &out, dark_level, max_j)?;
            Ok(Outcome::Success)
        }
        Command::SimulateChannel => {
            let seed = resolve_seed(cli.seed, &config)?;
            out.write_resolved_config(&config, Some(seed))?;
            commands::simulate_channel::run(&config, &out, seed)?;
            Ok(Outcome::Success)
        }
        Command::RunProtocol => {
            let seed = resolve_seed(cli.seed, &config)?;
            out.write_resolved_config(&config, Some(seed))?;
            let aborted = commands::run_protocol::run(&config, &out, seed)?;
            if aborted {
                Ok(Outcome::ProtocolAbort)
            } else {
                Ok(Outcome::Success)
            }
        }
        Command::Tomography => {
            let seed = resolve_seed(cli.seed, &config)?;
            out.write_resolved_config(&config, Some(seed))?;
            commands::tomography::run(&config, &out, seed)?;
            Ok(Outcome::Success)
        }
        Command::VortexTrack => {
            let seed = resolve_seed(cli.seed, &config)?;
            out.write_resolved_config(&config, Some(seed))?;
            commands::vortex_track::run(&config, &out, seed)?;
            Ok(Outcome::Success)
        }
    }
}

#[cfg(feature = "parallel")]
fn configure_threads(threads: Option<usize>) -> anyhow::Result<()> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| anyhow::anyhow!("configuring {n} threads: {e}"))?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn configure_threads(threads: Option<usize>) -> anyhow::Result<()> {
    if threads.is_some() {
        eprintln!("note: built without the parallel feature; --threads is ignored");
    }
    Ok(())
}
