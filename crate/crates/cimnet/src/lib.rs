//! File formats, builtin architectures and the command-line front end for
//! [`cimnet_core`].

use std::path::{Path, PathBuf};

pub mod activations;
pub mod arch;
pub mod cli;
pub mod params_file;
pub mod report;
pub mod spec_file;
pub mod suite;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Schema(String),
    #[error("architecture: {0}")]
    Arch(String),
    #[error(transparent)]
    Network(#[from] cimnet_core::Error),
}

impl FormatError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        FormatError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
