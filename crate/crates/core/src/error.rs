use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected {expected} entries, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("eigensolve failed on mode {mode}: {reason}")]
    Eigensolve { mode: String, reason: String },

    #[error("no retained eigenvalue after filtering ({0}); the resolution is probably too low")]
    NoRetained(String),

    #[error("time step {dt} exceeds the stability bound; try dt <= {suggested}")]
    StepTooLarge { dt: f64, suggested: f64 },

    #[error("non-finite state at t = {t}: {what}")]
    NonFinite { t: f64, what: String },

    #[error("threshold {chi} never crossed before t = {t_end}")]
    NoCrossing { chi: f64, t_end: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { field: field.into(), message: message.into() }
    }
}
