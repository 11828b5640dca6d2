use thiserror::Error;

/// Errors raised by model construction, integration and the experiment layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("operator is not Hermitian: max |O - O^dag| = {asymmetry:.3e} (largest entry {scale:.3e})")]
    NotHermitian { asymmetry: f64, scale: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("truncation not converged: {0}")]
    NotConverged(String),
    #[error("invariant breach at t = {t}: {what} = {value:.3e}")]
    InvariantBreach { t: f64, what: String, value: f64 },
    #[error("crossing location failed: {0}")]
    Crossing(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
