use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("topology must have at least one client and one base station")]
    EmptyTopology,
    #[error("client {client} has no base station with a positive rate")]
    ZeroConnectivityClient { client: usize },
    #[error("client {client} has non-positive weight {weight}")]
    NonPositiveWeight { client: usize, weight: f64 },
    #[error("invalid rate {rate} for client {client} at base station {bs}")]
    NegativeRate { client: usize, bs: usize, rate: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },
    #[error("throughput of client {client} is {value}, expected a positive value")]
    NonPositiveThroughput { client: usize, value: f64 },
    #[error("water-fill needs at least one client")]
    EmptyClientSet,
    #[error("{class} base stations: need at least {needed}, have {available}")]
    InsufficientBss {
        class: String,
        needed: usize,
        available: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("projected-gradient solver stopped after {iterations} iterations with gap {gap:e}")]
    NoConvergence { iterations: usize, gap: f64 },
    #[error("no step size on the grid reached the target potential")]
    NoFeasibleGamma,
    #[error("topology file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
