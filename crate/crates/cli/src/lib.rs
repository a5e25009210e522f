//! Front end for the `eitsim` binary: configuration parsing, command execution and output.

pub mod app;
pub mod config;
pub mod run;
pub mod svg;

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] eitsim_core::Error),

    #[error("fit did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 configuration or invalid input, 3 numerical failure, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => core_exit_code(e),
            CliError::NotConverged { .. } => 3,
            CliError::Io { .. } => 4,
        }
    }
}

fn core_exit_code(e: &eitsim_core::Error) -> i32 {
    use eitsim_core::Error as E;
    match e {
        E::InvalidArgument(_) | E::Configuration(_) => 2,
        E::NoWindow(_) | E::Resolution(_) => 3,
        E::Sweep { source, .. } => core_exit_code(source),
    }
}
