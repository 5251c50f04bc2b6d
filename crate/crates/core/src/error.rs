use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Model parameters violate a structural requirement (PSD, positivity, partition).
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Grid or estimator configuration is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// Requested work exceeds what can be represented or allocated.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// A formula was evaluated outside its domain of definition.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unknown {family} '{name}' (available: {available})")]
    UnknownStrategy {
        family: &'static str,
        name: String,
        available: String,
    },

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn model(msg: impl Into<String>) -> Self {
        Error::InvalidModel(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors caused by user configuration rather than numerics or IO.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Parse { .. }
                | Error::UnknownStrategy { .. }
                | Error::Json(_)
                | Error::InvalidModel(_)
                | Error::Domain(_)
        )
    }
}
