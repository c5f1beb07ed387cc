//! `hypobgk`: certificates, spectra, simulations and parameter sweeps for
//! BGK relaxation models.

mod commands;
mod config;

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use thiserror::Error;

use commands::{Outcome, Table};
use config::{Flags, RunConfig};

const EXIT_FAILED: u8 = 2;
const EXIT_BLOWUP: u8 = 3;
const EXIT_USAGE: u8 = 64;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] hypobgk::Error),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use hypobgk::Error as E;
        match self {
            CliError::Core(E::Certification { .. } | E::EigenSolver(_) | E::Defective { .. }) => EXIT_FAILED,
            CliError::Core(E::Blowup { .. } | E::Truncation { .. }) => EXIT_BLOWUP,
            _ => EXIT_USAGE,
        }
    }
}

#[derive(Parser)]
#[command(name = "hypobgk", version, about = "Hypocoercivity certificates and simulations for BGK models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certify a uniform decay rate with a family of Lyapunov matrices
    Certify(Flags),
    /// Spectral gaps of mode operators or finite generators
    Spectrum(Flags),
    /// Integrate a BGK equation and compare the fitted decay with the certified rate
    Simulate(Flags),
    /// Entropy and Fisher information along a finite BGK flow
    EntropyTrace(Flags),
    /// Certify over a grid of parameter values
    Sweep {
        #[command(flatten)]
        flags: Flags,
        /// Grid axis `name=v1,v2,…`; repeat for a Cartesian product
        #[arg(long, required = true)]
        grid: Vec<String>,
    },
}

fn write(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn write_table(path: &Path, table: &Table) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Io { path: path.display().to_string(), source: e.into() };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(&table.header).map_err(io)?;
    for row in &table.rows {
        w.write_record(row).map_err(io)?;
    }
    w.flush().map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn manifest(cfg: &RunConfig, outcome: &Outcome) -> Value {
    json!({
        "tool": "hypobgk",
        "version": env!("CARGO_PKG_VERSION"),
        "command": cfg.command,
        "config_hash": cfg.hash(),
        "rng": { "algorithm": hypobgk::simulator::RNG_ALGORITHM, "seed": cfg.seed },
        "config": cfg,
        "table": outcome.table.as_ref().map(|t| t.name),
        "passed": outcome.passed,
        "result": outcome.result,
    })
}

fn set_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("HYPOBGK_THREADS") else { return Ok(()) };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("HYPOBGK_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size the thread pool: {e}")))
}

fn run(cli: Cli) -> Result<bool, CliError> {
    set_threads()?;
    let (name, flags, grid) = match &cli.command {
        Command::Certify(f) => ("certify", f, None),
        Command::Spectrum(f) => ("spectrum", f, None),
        Command::Simulate(f) => ("simulate", f, None),
        Command::EntropyTrace(f) => ("entropy-trace", f, None),
        Command::Sweep { flags, grid } => ("sweep", flags, Some(grid)),
    };
    let cfg = RunConfig::resolve(name, flags)?;
    let outcome = match &cli.command {
        Command::Certify(_) => commands::certify(&cfg)?,
        Command::Spectrum(_) => commands::spectrum(&cfg)?,
        Command::Simulate(_) => commands::run_simulation(&cfg)?,
        Command::EntropyTrace(_) => commands::entropy_trace(&cfg)?,
        Command::Sweep { .. } => commands::sweep(&cfg, grid.expect("sweep has a grid"))?,
    };
    let doc = serde_json::to_string_pretty(&manifest(&cfg, &outcome)).expect("manifest serializes");
    if let Some(dir) = &cfg.out {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.display().to_string(), source })?;
        write(&dir.join("manifest.json"), doc.as_bytes())?;
        write(&dir.join("config.txt"), cfg.to_key_values().as_bytes())?;
        if let Some(table) = &outcome.table {
            write_table(&dir.join(table.name), table)?;
        }
    }
    // A closed pipe downstream is not an error of the run.
    let _ = writeln!(std::io::stdout(), "{doc}");
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: check failed; see \"result\" in the manifest");
            ExitCode::from(EXIT_FAILED)
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Core(hypobgk::Error::Certification { minors, .. }) = &e {
                eprintln!("minors: {minors:?}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
