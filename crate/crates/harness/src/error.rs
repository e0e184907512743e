use std::path::PathBuf;

use mfcg_core::MfcgError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error(transparent)]
    Solver(#[from] MfcgError),
}

impl HarnessError {
    /// Process exit code: 2 for solver non-convergence, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Solver(e) if e.is_non_convergence() => 2,
            _ => 1,
        }
    }
}
