mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;
use l1pca::Error;

use args::{merge_with_file, Cli, Command};

pub const EXIT_OK: u8 = 0;
pub const EXIT_VERIFY_FAILED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NOT_CONVERGED: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(Error::Io(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Lib(Error::Json(e))
    }
}

pub enum Outcome {
    Done,
    NotConverged,
    VerifyFailed,
}

fn exit_code(e: &CliError) -> u8 {
    match e {
        CliError::Usage(_) => EXIT_USAGE,
        CliError::Lib(e) => match e {
            Error::Diverged { .. } | Error::DegenerateUpdate { .. } | Error::UndefinedMetric(_) => EXIT_NUMERICAL,
            _ => EXIT_USAGE,
        },
    }
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    let cfg = cli.config.as_deref();
    match cli.command {
        Command::Generate(a) => commands::generate(merge_with_file(a, cfg)?),
        Command::Solve(a) => commands::solve(merge_with_file(a, cfg)?),
        Command::Compare(a) => commands::compare(merge_with_file(a, cfg)?),
        Command::Verify(a) => commands::verify(merge_with_file(a, cfg)?),
        Command::Cluster(a) => commands::cluster(merge_with_file(a, cfg)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::from(EXIT_OK),
        Ok(Outcome::NotConverged) => {
            eprintln!("l1pca: iteration limit reached before the tolerance was met");
            ExitCode::from(EXIT_NOT_CONVERGED)
        }
        Ok(Outcome::VerifyFailed) => ExitCode::from(EXIT_VERIFY_FAILED),
        Err(e) => {
            match &e {
                CliError::Usage(m) => eprintln!("l1pca: {m}"),
                CliError::Lib(err) => eprintln!("l1pca: {err}"),
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
