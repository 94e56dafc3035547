use thiserror::Error;

/// Errors raised across the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("hamiltonian model violates the single-well hypothesis: {0}")]
    Model(String),
    #[error("action grid error: {0}")]
    Grid(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("integration failed at t = {time}: {reason}")]
    Integration { time: f64, reason: String },
    #[error("outside chart or coefficient coverage: {0}")]
    Coverage(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("insufficient resolution: {0}")]
    Resolution(String),
    #[error("singular coefficient: {0}")]
    SingularCoefficient(String),
    #[error("ensemble failure: {0}")]
    Ensemble(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
