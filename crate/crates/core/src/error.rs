use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid: {0}")]
    Grid(String),
    #[error("derivative order {order} out of range 1..={max}")]
    OrderOutOfRange { order: usize, max: usize },
    #[error("field mismatch: {0}")]
    Mismatch(String),
    #[error("invalid operator: {0}")]
    Operator(String),
    #[error("invalid parameter `{name}`: {reason}")]
    Param { name: &'static str, reason: String },
    #[error("measurement set: {0}")]
    Measurement(String),
    #[error("empty carrier")]
    EmptyCarrier,
    #[error("no carrier point within any ball of the radius ladder")]
    EmptyBall,
    #[error("test function does not vanish on the boundary collar (node {node})")]
    TestFunctionSupport { node: usize },
    #[error(
        "inconsistent exact solution: max |k - K[u0]| = {deviation:e} exceeds gamma = {gamma:e}"
    )]
    InconsistentExact { deviation: f64, gamma: f64 },
    #[error("linear solve failed: {0}")]
    Linear(String),
}

pub type Result<T> = std::result::Result<T, Error>;
