use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value was NaN/infinite or outside its documented domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Mismatched dimensions or an inconsistent configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was called in the wrong order (e.g. stepping a finished episode).
    #[error("protocol error: {0}")]
    Protocol(String),

    /// The physics integrator produced a non-finite state.
    #[error("dynamics error: {0}")]
    Dynamics(String),

    #[error("not ready: {0}")]
    NotReady(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::InvalidInput(format!("{name} is not finite ({value})")))
    }
}
