//! Configuration parsing, tick-data ingestion and report serialization for
//! the tsrvlab command line.

pub mod config;
pub mod report;
pub mod ticks;

/// Errors classified by the exit code they map to: configuration problems
/// exit with 2, data problems with 3.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<tsrvlab_core::Error> for CliError {
    fn from(e: tsrvlab_core::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
