use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("invalid damping profile: {0}")]
    InvalidProfile(String),
    #[error("damping profile violates the positivity hypothesis: {0}")]
    HypothesisViolated(String),
    #[error("grid too coarse: {0}")]
    UnderResolved(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("state not admissible: {0}")]
    Inadmissible(String),
    #[error("singular matrix: zero pivot in column {column}")]
    Singular { column: usize },
    #[error("{what} did not converge after {iterations} iterations")]
    NotConverged { what: &'static str, iterations: usize },
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("contour passes through a zero: {0}")]
    ContourThroughZero(String),
    #[error("coupling c = {c} is within {distance:e} of a special value; pass an explicit case override")]
    AmbiguousCase { c: f64, distance: f64 },
    #[error("energy increased from {before:e} to {after:e} at step {step}")]
    EnergyIncrease { step: usize, before: f64, after: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
