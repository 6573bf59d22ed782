use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the solvers, the optimizer and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("length mismatch: expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("singular tridiagonal system at row {row} (pivot {pivot:e})")]
    SingularSystem { row: usize, pivot: f64 },

    #[error("non-finite value in {what} at time step {step}")]
    NonFinite { what: &'static str, step: usize },

    #[error("sweep {iteration}: {source}")]
    Sweep {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("opinion left [-1, 1]: {value} after {interaction} interaction")]
    OutOfDomain { value: f64, interaction: &'static str },

    #[error("noise rejection cap exceeded ({attempts} draws)")]
    RejectionCap { attempts: usize },

    #[error("empty {0} ensemble")]
    EmptySpecies(&'static str),

    #[error("config line {line}: {reason}")]
    ConfigParse { line: usize, reason: String },

    #[error("config field `{field}`: {reason}")]
    ConfigInvalid { field: String, reason: String },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("nothing to write: {0}")]
    EmptyOutput(&'static str),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by user configuration rather than a solver failure.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::ConfigParse { .. }
                | Error::ConfigInvalid { .. }
                | Error::UnknownPreset(_)
        )
    }
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, actual })
    }
}
