use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

mod commands;
mod output;

use output::{Failure, Sink};

/// Lens data, boundary distances and jet recovery on warped strips.
///
/// Every command prints a JSON summary on stdout. Tables and other artifacts
/// are written only when `--out` names a directory.
#[derive(Debug, Parser, Serialize)]
#[command(name = "lensjet", version)]
pub struct Cli {
    /// Directory for CSV and JSON artifacts.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Pass/fail tolerance; each command has its own default.
    #[arg(long, global = true, value_parser = positive)]
    pub tol: Option<f64>,

    /// Worker threads for parallel sweeps.
    #[arg(long, global = true, env = "LENSJET_THREADS", value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,

    /// Seed for randomized inputs, echoed in every summary.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Compare the lens data of two strips with both methods.
    LensCompare(commands::LensCompareArgs),
    /// Build the C^1 partner of the piecewise profile and verify it.
    BuildC1(commands::BuildC1Args),
    /// Recover the boundary jet from boundary distances.
    JetRecover(commands::JetRecoverArgs),
    /// Sublevel-set measures of one or two warps.
    Sublevel(commands::SublevelArgs),
    /// A single boundary chord between two points of y = 0.
    Chord(commands::ChordArgs),
}

pub fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("{v} is not a positive number")),
        Err(e) => Err(e.to_string()),
    }
}

fn run(cli: &Cli) -> Result<bool, Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    let sink = Sink::new(cli.out.clone())?;
    let (claims_hold, result) = match &cli.command {
        Command::LensCompare(a) => commands::lens_compare(a, cli.tol, &sink)?,
        Command::BuildC1(a) => commands::build_c1(a, cli.tol, &sink)?,
        Command::JetRecover(a) => commands::jet_recover(a, cli.tol, &sink)?,
        Command::Sublevel(a) => commands::sublevel(a, cli.tol, &sink)?,
        Command::Chord(a) => commands::chord(a, &sink)?,
    };
    let summary: Value = json!({
        "config": cli,
        "claims_hold": claims_hold,
        "result": result,
    });
    sink.json("summary.json", &summary)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).map_err(|e| Failure::Usage(e.to_string()))?
    );
    Ok(claims_hold)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("lensjet: {f}");
            ExitCode::from(f.code())
        }
    }
}
