//! `indoorloc`: simulate environments, survey them, train room classifiers and
//! run localization experiments from a JSON run config.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "indoorloc", version, about = "Room-landmark particle filter localization experiments")]
struct Cli {
    /// JSON run config; relative paths inside it resolve against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build an environment and write every simulator artifact.
    Simulate,
    /// Re-run the room and coordinate surveys of an existing environment.
    Survey,
    /// Fit per-anchor ranging models from reference measurements.
    FitRanging,
    /// Cross-validated room classification accuracy table.
    EvaluateLandmark,
    /// Run PFML, NLST or KNN over recorded observations.
    Localize,
    /// Offline survey effort in minutes.
    SurveyTime,
    /// Summarize a localization report and write its error CDF.
    Report,
}

/// Raised when a run completes its inputs but produces no usable estimate.
#[derive(Debug)]
pub struct Degenerate(pub String);

impl std::fmt::Display for Degenerate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "degenerate run: {}", self.0)
    }
}

impl std::error::Error for Degenerate {}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let cfg = load_config(cli)?;
    match cli.command {
        Command::Simulate => commands::simulate(&cfg),
        Command::Survey => commands::survey(&cfg),
        Command::FitRanging => commands::fit_ranging(&cfg),
        Command::EvaluateLandmark => commands::evaluate_landmark(&cfg),
        Command::Localize => commands::localize(&cfg),
        Command::SurveyTime => commands::survey_time(&cfg),
        Command::Report => commands::report(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Degenerate>().is_some() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
