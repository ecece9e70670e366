//! `clab`: environment generation, walks, corrector solves and verification
//! suites for random walks among random conductances.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 a selected check failed.

mod commands;
mod config;
mod manifest;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "clab", version, about = "Random walks among random conductances")]
struct Cli {
    /// JSON run configuration; flags given on the command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample an environment and write it with its moment report.
    Env(RunConfig),
    /// Simulate trajectories on a stored environment.
    Walk(RunConfig),
    /// Solve the corrector equation and report the effective covariance.
    Corrector(RunConfig),
    /// Run a verification suite and write the report.
    Verify(RunConfig),
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(clab_core::Error),
    /// Names of the failing checks.
    Failed(Vec<String>),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Usage(format!("{}: {e}", path.display()))
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 2,
            _ => 1,
        }
    }
}

impl From<clab_core::Error> for CliError {
    fn from(e: clab_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Failed(names) => {
                writeln!(f, "{} check(s) failed:", names.len())?;
                for n in names {
                    writeln!(f, "  {n}")?;
                }
                Ok(())
            }
        }
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("CLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("CLAB_THREADS={raw:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    let (name, flags) = match &cli.command {
        Command::Env(c) => ("env", c),
        Command::Walk(c) => ("walk", c),
        Command::Corrector(c) => ("corrector", c),
        Command::Verify(c) => ("verify", c),
    };
    let base = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    let mut config = base.overlaid(flags);
    config.command = Some(name.to_string());
    match name {
        "env" => commands::env(&config),
        "walk" => commands::walk(&config),
        "corrector" => commands::corrector(&config),
        _ => verify::verify(&config),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("clab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
