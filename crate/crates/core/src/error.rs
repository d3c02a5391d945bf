use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Utilization at or above the stability margin.
    #[error("unstable system: utilization rho = {rho:.6} (must be <= 1 - 1e-9)")]
    Unstable { rho: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("insufficient horizon: {0}")]
    InsufficientHorizon(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("sweep grids differ: {0}")]
    GridMismatch(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
