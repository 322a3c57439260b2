//! `pll-lockin`: command-line front end of `lockin-core`.
//!
//! Exit status is 0 on success, 2 on flag or validation errors and 1 when a
//! computation fails.

mod commands;
mod opts;

use std::fmt;
use std::process::ExitCode;

use clap::Parser;

use opts::Cli;

#[derive(Debug)]
pub enum CliError {
    /// Bad flag, config key or parameter value.
    Usage(String),
    /// The computation itself failed.
    Compute(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Compute(m) => f.write_str(m),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Compute(_) => 1,
        }
    }
}

fn main() -> ExitCode {
    // clap exits with 2 on its own for unknown flags and unparsable values
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
