use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("incompatible policies: {0}")]
    IncompatiblePolicies(String),

    #[error("divergence detected at iteration {k}: non-finite {what}")]
    DivergenceDetected { k: u64, what: &'static str },

    #[error("unknown origin {origin} (table has {slots} slots)")]
    UnknownOrigin { origin: usize, slots: usize },

    #[error("invalid batch: {0}")]
    InvalidBatch(String),

    #[error("invalid spectrum: mu={mu}, L={l} (need 0 < mu <= L)")]
    InvalidSpectrum { mu: f64, l: f64 },

    #[error("index {index} out of range for {n} components")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("worker thread panicked")]
    WorkerPanic,

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn dim(expected: usize, got: usize) -> Self {
        Error::DimensionMismatch { expected, got }
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::dim(expected, got))
    }
}
