use std::path::{Path, PathBuf};

use thiserror::Error;

/// Command failures, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(#[from] chaoseq_core::Error),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed data in {path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

impl CliError {
    /// Precondition failures detected while validating the configuration.
    pub fn config(e: chaoseq_core::Error) -> Self {
        Self::Config(e.to_string())
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(path: &Path, reason: impl Into<String>) -> Self {
        Self::Format {
            path: path.to_path_buf(),
            reason: reason.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Numerical(_) => 3,
            Self::Io { .. } | Self::Format { .. } => 4,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
