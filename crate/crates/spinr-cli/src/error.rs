//! CLI failure taxonomy and the exit codes it maps onto.
//!
//! Every failure class gets its own code so scripts can branch on them:
//!
//! | code | meaning                                          |
//! |------|--------------------------------------------------|
//! | 0    | success                                          |
//! | 2    | bad usage (clap errors use the same code)        |
//! | 3    | training diverged                                |
//! | 4    | bitstream undecodable or malformed               |
//! | 5    | file I/O, including unreadable or malformed PPMs |

use std::path::PathBuf;

use spinr_core::{FormatError, ImageIoError, TrainError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Flag combinations clap cannot rule out on its own.
    #[error("{0}")]
    Usage(String),

    #[error("seed {seed}: {source}")]
    Train { seed: u64, source: TrainError },

    #[error("{path}: {source}")]
    Format { path: PathBuf, source: FormatError },

    #[error("{path}: {source}")]
    Image { path: PathBuf, source: ImageIoError },

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Train { .. } => 3,
            CliError::Format { .. } => 4,
            CliError::Image { .. } | CliError::Io { .. } => 5,
        }
    }
}

/// Shorthand for wrapping `std::io` failures with the path they hit.
pub fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    move |source| CliError::Io { path: path.into(), source }
}
