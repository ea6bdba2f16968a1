//! `balance`: analyze force-platform trials, simulate the intermittent
//! controller on a standing plant, tune PID gains and summarize traces.

mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use balance_core::config::{OutputFormat, RunConfig};
use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{CliError, Exit};

#[derive(Parser, Debug)]
#[command(name = "balance", version, about = "Phase-space intermittent balance control toolkit")]
struct Cli {
    /// Configuration file of `section.key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Low-pass cutoff applied to the COP, Hz.
    #[arg(long = "filter-cutoff", global = true)]
    filter_cutoff: Option<f64>,
    /// Distance at which the controller switches on, cm.
    #[arg(long, global = true)]
    threshold: Option<f64>,
    /// Override any configuration key, e.g. `--set sim.duration=60`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    Paper,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Phase-space mapping, distances and zone occupancy of recorded trials.
    Analyze {
        /// Trial records; defaults to `input.trial`.
        trials: Vec<PathBuf>,
    },
    /// Closed-loop run of the controller on the pendulum plant.
    Simulate,
    /// Ziegler-Nichols gains for the configured benchmark plant.
    Tune {
        #[arg(long, value_enum)]
        preset: Option<Preset>,
    },
    /// Episode, recovery and occupancy summary of a simulated trace.
    Report {
        /// Trace written by `simulate` (CSV or JSON).
        trace: PathBuf,
    },
}

fn build_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => {
            if !p.is_file() {
                return Err(CliError::new(
                    Exit::Config,
                    "config::MissingPath",
                    format!("no such config file {}", p.display()),
                ));
            }
            RunConfig::load(p)?
        }
        None => RunConfig::default(),
    };
    for kv in &cli.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| {
            CliError::new(Exit::Config, "config::Syntax", format!("--set expects KEY=VALUE, got {kv:?}"))
        })?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    if let Some(f) = cli.format {
        cfg.format = match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        };
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(fc) = cli.filter_cutoff {
        cfg.filter_cutoff = fc;
    }
    if let Some(t) = cli.threshold {
        cfg.fuzzy_threshold = t;
    }
    if let Command::Tune { preset: Some(Preset::Paper) } = cli.command {
        cfg.tune_paper_preset = true;
    }
    cfg.validate()?;
    cfg.check_paths()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = build_config(cli)?;
    match &cli.command {
        Command::Analyze { trials } => commands::analyze(trials, &cfg).map(|_| ()),
        Command::Simulate => commands::simulate_cmd(&cfg),
        Command::Tune { .. } => commands::tune_cmd(&cfg),
        Command::Report { trace } => commands::report_cmd(trace, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit as u8)
        }
    }
}
