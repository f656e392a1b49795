//! `gbtsvm` command-line front end.
//!
//! Exit codes: 0 success, 2 usage, 3 input, 4 computation.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use crate::args::Cli;

/// Failure classes that map onto the documented exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(String),
    Compute(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Input(_) => 3,
            CliError::Compute(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Input(m) | CliError::Compute(m) => m,
        }
    }
}

impl From<gbtsvm::Error> for CliError {
    fn from(e: gbtsvm::Error) -> Self {
        use gbtsvm::Error as E;
        let msg = e.to_string();
        match e {
            E::InvalidConfig(_) | E::InvalidFoldCount { .. } => CliError::Usage(msg),
            E::Io { .. }
            | E::Parse { .. }
            | E::Label(_)
            | E::EmptyDataset
            | E::EmptyInput
            | E::SingleClassDataset
            | E::SingleClassFamily
            | E::DimensionMismatch { .. }
            | E::LengthMismatch { .. }
            | E::Shape(_)
            | E::ModelFormat { .. } => CliError::Input(msg),
            _ => CliError::Compute(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("GBTSVM_LOG", level))
        .format_timestamp(None)
        .init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.global.verbose);
    if let Some(n) = cli.global.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
