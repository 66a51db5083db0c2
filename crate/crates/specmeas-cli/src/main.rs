//! `specmeas` command-line driver.

mod commands;
mod config;
mod expr;
mod output;
mod reproduce;

use std::process::ExitCode;

use clap::Parser;

use crate::commands::Cli;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Spec(#[from] specmeas::SpecError),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config error: {0}")]
    Config(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Spec(specmeas::SpecError::Parse(_)) => "parse",
            CliError::Spec(specmeas::SpecError::InvalidArgument(_)) => "invalid_argument",
            CliError::Spec(specmeas::SpecError::NotConverged { .. }) => "not_converged",
            CliError::Spec(_) => "computation",
            CliError::Io { .. } => "io",
            CliError::Config(_) => "config",
        }
    }

    /// One-line JSON object describing the failure.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": { "kind": self.kind(), "message": self.to_string() } }).to_string()
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let err = CliError::Usage(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(2);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(2)
        }
    }
}
