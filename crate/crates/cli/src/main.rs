//! `combflow`: scenarios, verifications and experiments from the command line.
//!
//! Exit codes: 0 success, 1 a verification failed, 2 configuration error,
//! 3 internal guard (event limit or an unexpected library error).

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use combflow::{Rational, TraceOptions};
use serde_json::json;
use thiserror::Error;

use crate::commands::Settings;
use crate::config::{parse_range, parse_rational, LevelRange, Scenario};
use crate::output::{run_dir, write_run, Run};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("guard: {0}")]
    Guard(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Guard(_) | CliError::Internal(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "combflow", version, about = "Exact comb flows, ill-posedness demonstrations and related experiments")]
struct Cli {
    /// Scenario file (JSON; exact numbers as integers or "p/q" strings).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory; defaults to $COMBFLOW_OUT_ROOT/<subcommand>.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel batches.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Event limit per trajectory.
    #[arg(long, global = true)]
    max_events: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Trajectories through the configured field.
    Trace,
    /// Disjointness and jump-balance reports.
    VerifyField {
        #[arg(long, value_parser = parse_range)]
        n: Option<LevelRange>,
    },
    /// Digit-conditional shifts of single combs.
    VerifyShifts {
        #[arg(long, value_parser = parse_range)]
        k: Option<LevelRange>,
    },
    /// Digit transfer of the level-k comb composition.
    VerifyPsi {
        #[arg(long, value_parser = parse_range)]
        k: Option<LevelRange>,
    },
    /// Initial-data and solution distances, stripe patterns, weak limit, residual threshold.
    Illposed {
        #[arg(long, value_parser = parse_range)]
        n: Option<LevelRange>,
        #[arg(long, value_parser = parse_rational)]
        cos_beta: Option<Rational>,
    },
    /// Scalar fans, Godunov comparison, vector solutions and the viscosity family.
    Riemann,
    /// Mollified-flow tables.
    Compactness,
    /// Geometry and raster exports.
    Figures {
        #[arg(long, value_parser = parse_range)]
        k: Option<LevelRange>,
        #[arg(long, value_parser = parse_range)]
        n: Option<LevelRange>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Trace => "trace",
            Command::VerifyField { .. } => "verify-field",
            Command::VerifyShifts { .. } => "verify-shifts",
            Command::VerifyPsi { .. } => "verify-psi",
            Command::Illposed { .. } => "illposed",
            Command::Riemann => "riemann",
            Command::Compactness => "compactness",
            Command::Figures { .. } => "figures",
        }
    }
}

fn execute(cli: &Cli) -> Result<bool, CliError> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    }
    let scenario = cli.config.as_deref().map(Scenario::load).transpose()?;
    let mut opts = TraceOptions::default();
    if let Some(m) = cli.max_events {
        opts.max_events = m;
    }
    let settings = Settings { scenario, samples: cli.samples, seed: cli.seed, opts };
    let mut run = Run::default();
    match &cli.command {
        Command::Trace => commands::trace_cmd(&settings, &mut run)?,
        Command::VerifyField { n } => commands::verify_field_cmd(&settings, *n, &mut run)?,
        Command::VerifyShifts { k } => commands::verify_shifts_cmd(&settings, *k, &mut run)?,
        Command::VerifyPsi { k } => commands::verify_psi_cmd(&settings, *k, &mut run)?,
        Command::Illposed { n, cos_beta } => commands::illposed_cmd(&settings, *n, cos_beta.clone(), &mut run)?,
        Command::Riemann => commands::riemann_cmd(&settings, &mut run)?,
        Command::Compactness => commands::compactness_cmd(&settings, &mut run)?,
        Command::Figures { k, n } => commands::figures_cmd(&settings, *k, *n, &mut run)?,
    }
    let inputs = json!({
        "config": cli.config,
        "scenario": settings.scenario,
        "samples": cli.samples,
        "seed": cli.seed,
        "jobs": cli.jobs,
        "max_events": settings.opts.max_events,
        "command": format!("{:?}", cli.command),
    });
    let dir = run_dir(cli.out.as_deref(), cli.command.name());
    write_run(&dir, cli.command.name(), inputs, &run)?;
    for c in &run.claims {
        let status = match c.pass {
            Some(true) => "pass",
            Some(false) => "FAIL",
            None => "info",
        };
        println!("{status:>4}  {}", c.claim);
    }
    println!("wrote {}", dir.display());
    Ok(run.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("combflow: {e}");
            ExitCode::from(e.code())
        }
    }
}
