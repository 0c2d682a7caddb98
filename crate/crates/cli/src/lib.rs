//! Library half of the `countproc` command-line interface.
//!
//! The binary reads count data from CSV, fits one of the rounded-process
//! models, and writes posterior draws, summaries, and plot tables back out
//! as CSV. Everything here is deterministic: each output file embeds the
//! seed and a short hash of the fully resolved configuration, and rerunning
//! a command reproduces its files byte for byte.
//!
//! The pieces live in this library so they can be tested in isolation:
//!
//! - [`config`]: flat `key=value` configuration files, flag/file/default
//!   resolution, and the resolved-configuration hash.
//! - [`table`]: CSV parsing for the input formats and the writers shared by
//!   every output file.
//! - [`commands`]: one entry point per subcommand, taking resolved options
//!   and returning the list of files written.

pub mod commands;
pub mod config;
pub mod table;

use std::path::Path;

/// Result alias for the command-line layer.
pub type Result<T> = std::result::Result<T, CliError>;

/// Errors surfaced to the terminal; every variant exits with code 1.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// The model or benchmark rejected its inputs or failed numerically.
    #[error("{0}")]
    Model(#[from] countproc_core::Error),

    /// A file could not be read or written.
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    /// Malformed input data or configuration (message carries the source
    /// location where one exists).
    #[error("{0}")]
    Input(String),
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }
}
