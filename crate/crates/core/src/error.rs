use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the simulator, learners, or harness.
#[derive(Debug, Error)]
pub enum DockError {
    /// An input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An API called in the wrong order or state.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("simulation diverged: {0}")]
    Diverged(String),

    /// A configuration key failed validation. `key` is the dotted path.
    #[error("invalid config key {key}: {message}")]
    Config { key: String, message: String },

    /// A checkpoint or data file could not be decoded. `field` names the offending part.
    #[error("format error in {field}: {message}")]
    Format { field: String, message: String },

    #[error("training aborted: {0}")]
    Training(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl DockError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        DockError::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn format(field: impl Into<String>, message: impl Into<String>) -> Self {
        DockError::Format {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DockError::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            DockError::Domain(_) => "domain",
            DockError::Usage(_) => "usage",
            DockError::Diverged(_) => "diverged",
            DockError::Config { .. } => "config",
            DockError::Format { .. } => "format",
            DockError::Training(_) => "training",
            DockError::Io { .. } => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, DockError>;
