//! `ugc`: fit joint stiffness models, query them, and size ring modules.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ugc_core::data::FamilyKind;

use crate::config::FileConfig;

#[derive(Debug, Parser)]
#[command(
    name = "ugc",
    version,
    about = "Compliant-joint models and ring-module actuator sizing"
)]
struct Cli {
    /// TOML key = value file; falls back to $UGC_CONFIG.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Suppress tables and notes; results and errors still print.
    #[arg(long, global = true)]
    quiet: bool,
    /// Machine-readable JSON on standard output.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit force and return-angle models from a measurement CSV.
    Fit(FitArgs),
    /// Predict force and return angle from a model archive.
    Predict(PredictArgs),
    /// Size a ring module from a design spec and a joint model.
    Design(DesignArgs),
    /// Write the archive of a published joint model.
    Builtin(BuiltinArgs),
    /// Check a measurement CSV or a design spec without computing anything.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Measurement CSV.
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    #[arg(long, value_parser = parse_family)]
    pub family: FamilyKind,
    /// Archive to write.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Angle bin for averaging repeat runs, degrees.
    #[arg(long, value_name = "DEG")]
    pub bin: Option<f64>,
    /// Degree of the comparison polynomial.
    #[arg(long, value_name = "N")]
    pub poly_degree: Option<usize>,
    /// Hyperparameter choice: `tune` (grid search) or `defaults`.
    #[arg(long, value_name = "MODE")]
    pub hyper: Option<String>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model archive.
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    /// Deformation angle, degrees.
    #[arg(
        long,
        value_name = "DEG",
        required_unless_present = "sweep",
        conflicts_with = "sweep"
    )]
    pub theta: Option<f64>,
    /// Joint thickness for curve models, mm.
    #[arg(long, value_name = "MM")]
    pub thickness: Option<f64>,
    /// Emit a CSV curve over `start:stop:step` degrees.
    #[arg(long, value_name = "START:STOP:STEP")]
    pub sweep: Option<String>,
    /// Predict outside the validated window instead of failing.
    #[arg(long)]
    pub allow_extrapolation: bool,
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    /// Ring design spec, JSON.
    #[arg(long, value_name = "PATH")]
    pub spec: PathBuf,
    /// Joint model archive.
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    /// Report JSON to write.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuiltinArgs {
    #[arg(long, value_parser = parse_family)]
    pub family: FamilyKind,
    /// Archive to write.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ValidateArgs {
    /// Measurement CSV to check.
    #[arg(long, value_name = "PATH")]
    pub data: Option<PathBuf>,
    /// Design spec to check.
    #[arg(long, value_name = "PATH")]
    pub spec: Option<PathBuf>,
}

fn parse_family(s: &str) -> Result<FamilyKind, String> {
    s.parse().map_err(|_| {
        let names: Vec<&str> = FamilyKind::ALL.iter().map(|k| k.as_str()).collect();
        format!("unknown family `{s}`; expected one of {}", names.join(", "))
    })
}

/// Output switches after merging flags with the config file.
#[derive(Debug, Clone, Copy)]
pub struct Output {
    pub quiet: bool,
    pub json: bool,
}

fn run(cli: Cli) -> Result<(), error::CliError> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let out = Output {
        quiet: cli.quiet || file.quiet.unwrap_or(false),
        json: cli.json || file.json.unwrap_or(false),
    };
    match cli.command {
        Command::Fit(a) => commands::fit(&a, &file, out),
        Command::Predict(a) => commands::predict(&a, &file, out),
        Command::Design(a) => commands::design(&a, out),
        Command::Builtin(a) => commands::builtin(&a, out),
        Command::Validate(a) => commands::validate(&a, out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            for line in e.message.lines() {
                eprintln!("error: {line}");
            }
            ExitCode::from(e.code)
        }
    }
}
