//! Command line driver for the D-bar solver: run specifications, output
//! files, and exit-code policy.

pub mod run;
pub mod spec;

use std::path::{Path, PathBuf};

pub use run::{execute, RunReport};
pub use spec::{KSelection, Output, RunSpec};

/// Process exit codes.
pub mod exit {
    /// Every solve succeeded.
    pub const SUCCESS: i32 = 0;
    /// Usage, spec, or I/O error; partial outputs were removed.
    pub const ERROR: i32 = 1;
    /// A solve diverged or stalled above tolerance.
    pub const SOLVER_FAILURE: i32 = 2;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}", spec_message(*line, msg))]
    Spec { line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] dbar_core::Error),

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

fn spec_message(line: usize, msg: &str) -> String {
    if line == 0 {
        format!("spec: {msg}")
    } else {
        format!("spec line {line}: {msg}")
    }
}
