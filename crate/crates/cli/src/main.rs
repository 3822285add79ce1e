//! `tlsloss`: resonator fitting, photon-number sweeps, loss budgets and
//! thin-film participation from the command line.
//!
//! Every command writes line-delimited JSON records to stdout, or to the
//! file named by `--out`. The first record describes the run (tool
//! version, inputs and their SHA-256 digests).
//!
//! Exit codes: 0 success, 2 input error, 3 fit failure, 4 solver
//! non-convergence.

mod commands;
mod config;
mod error;
mod plot;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::Config;
use crate::error::CliError;
use crate::report::Report;

#[derive(Parser, Debug)]
#[command(name = "tlsloss", version, about = "Resonator loss analysis and interface participation")]
struct Cli {
    /// Sectioned key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Also write SVG plots where a command supports them.
    #[arg(long, global = true)]
    plot: bool,

    /// Seed for commands that draw random numbers.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads for parallel commands (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit one S21 trace.
    Fit(commands::fit::Args),
    /// Fit every trace in a directory and report Qi against photon number.
    Sweep(commands::sweep::Args),
    /// Straight-line fit of 1/Qi against the number of lift-off sites.
    RegressSites(commands::regress::Args),
    /// Mesh-converged thin-film participations of a cross-section.
    Participation(commands::participation::Args),
    /// Evaluate a loss budget.
    Budget(commands::budget::Args),
    /// Resonator/qubit voltage and participation ratios.
    Ratio(commands::ratio::Args),
    /// Write a synthetic power sweep (traces plus metadata).
    Synth(commands::synth::Args),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Fit(_) => "fit",
            Command::Sweep(_) => "sweep",
            Command::RegressSites(_) => "regress-sites",
            Command::Participation(_) => "participation",
            Command::Budget(_) => "budget",
            Command::Ratio(_) => "ratio",
            Command::Synth(_) => "synth",
        }
    }
}

/// Options shared by every command.
pub struct Context {
    pub config: Config,
    pub out: Option<PathBuf>,
    pub plot: bool,
    pub seed: u64,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Input("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Input(format!("cannot configure thread pool: {e}")))?;
    }
    let mut report = Report::new(cli.command.name(), cli.seed);
    let config = match &cli.config {
        Some(path) => {
            report.add_input(path)?;
            Config::read(path)?
        }
        None => Config::default(),
    };
    let ctx = Context {
        config,
        out: cli.out.clone(),
        plot: cli.plot,
        seed: cli.seed,
    };
    let outcome = match &cli.command {
        Command::Fit(a) => commands::fit::run(a, &ctx, &mut report),
        Command::Sweep(a) => commands::sweep::run(a, &ctx, &mut report),
        Command::RegressSites(a) => commands::regress::run(a, &ctx, &mut report),
        Command::Participation(a) => commands::participation::run(a, &ctx, &mut report),
        Command::Budget(a) => commands::budget::run(a, &ctx, &mut report),
        Command::Ratio(a) => commands::ratio::run(a, &ctx, &mut report),
        Command::Synth(a) => commands::synth::run(a, &ctx, &mut report),
    };
    // Records gathered before a failure (for example a refinement
    // trajectory) are still worth keeping.
    let written = report.write(cli.out.as_deref());
    outcome?;
    written
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
