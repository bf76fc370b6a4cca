use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod plot;
mod run;
mod sweep;

/// Default output directory when `--out` is not given.
pub const OUT_ENV: &str = "LTASIM_OUT";

#[derive(Debug, Parser)]
#[command(name = "ltasim", version, about = "Blimp ball-game match simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TraceLevel {
    /// Event log only.
    Events,
    /// Event log plus one record per agent per step.
    Full,
    /// Report only.
    None,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one match and write its report, trace and events.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario's rng_seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = OUT_ENV, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = TraceLevel::Events)]
        trace: TraceLevel,
        /// Also dump post-NMS detections for every frame.
        #[arg(long)]
        detections: bool,
    },
    /// Run one match per seed and tabulate the results.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// Half-open range `A..B`, or inclusive `A..=B`.
        #[arg(long, value_parser = sweep::parse_seed_range)]
        seeds: sweep::SeedRange,
        #[arg(long, default_value_t = default_workers(), value_parser = clap::value_parser!(u32).range(1..))]
        workers: u32,
        #[arg(long, env = OUT_ENV, default_value = "out")]
        out: PathBuf,
    },
    /// Turn a trace or event file into CSV tables and SVG charts.
    Plotdata {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, env = OUT_ENV, default_value = "out")]
        out: PathBuf,
    },
}

fn default_workers() -> u32 {
    std::thread::available_parallelism().map_or(1, |n| n.get() as u32)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run { scenario, seed, out, trace, detections } => {
            run::cmd_run(&scenario, seed, &out, trace, detections)
        }
        Command::Sweep { scenario, seeds, workers, out } => {
            sweep::cmd_sweep(&scenario, seeds, workers as usize, &out)
        }
        Command::Plotdata { trace, out } => plot::cmd_plotdata(&trace, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
