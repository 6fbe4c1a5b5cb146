use thiserror::Error;

/// Errors shared across the simulation and analysis modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate parameters: {0}")]
    DegenerateParameters(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("simulation diverged at t = {t} s: |delta_omega| = {delta_omega} pu exceeds 0.1 pu")]
    SimulationDiverged { t: f64, delta_omega: f64 },

    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error("scenario parse error: {0}")]
    ScenarioParse(String),

    #[error("regime mismatch: {0}")]
    RegimeMismatch(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
