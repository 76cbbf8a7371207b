//! Command implementations behind the `rpeclu` binary.
//!
//! Kept as a library so integration tests can drive the commands directly
//! and inspect the files they write.

pub mod commands;
pub mod io;

use std::path::PathBuf;

use rpeclu_core::RpecluConfig;

/// Where the observations come from.
#[derive(Debug, Clone)]
pub enum InputSource {
    /// Numeric CSV on disk, rows = observations.
    CsvPath(PathBuf),
    /// Built-in synthetic scenario, 1 through 26.
    Scenario(usize),
}

/// Everything a clustering run needs.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub input: InputSource,
    pub config: RpecluConfig,
    /// Directory receiving `partition.csv`, `ranking.tsv`, `diagnostics.json`.
    pub out_dir: PathBuf,
    /// Column holding ground-truth labels: a header name, or a 0-based index
    /// for headerless files. Excluded from the feature matrix.
    pub truth_column: Option<String>,
    /// Worker-thread cap; `None` uses the default pool.
    pub threads: Option<usize>,
}

/// Command failure carrying the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable or non-numeric input (exit 2).
    Input(String),
    /// Infeasible or out-of-range configuration (exit 3).
    Config(String),
    /// Unexpected runtime failure, e.g. an output write error (exit 1).
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Config(_) => 3,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Config(m) | CliError::Runtime(m) => m,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.message())
    }
}

impl std::error::Error for CliError {}

impl From<rpeclu_core::Error> for CliError {
    fn from(e: rpeclu_core::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("i/o error: {e}"))
    }
}
