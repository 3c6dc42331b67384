use thiserror::Error;

/// Errors raised by the distribution, estimation and allocation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid value domain: {0}")]
    InvalidDomain(String),

    #[error("component weights sum to {sum}, expected 1")]
    WeightSumMismatch { sum: f64 },

    #[error("negative mass {mass} at cell ({x}, {y})")]
    NegativeMass { x: i64, y: i64, mass: f64 },

    #[error("sub-distribution mass {mass} does not match its weight {weight}")]
    MassWeightMismatch { mass: f64, weight: f64 },

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("component {component} has no samples")]
    ZeroSampleSize { component: usize },

    #[error("fused joint distribution has no positive cell")]
    EmptySupport,

    #[error("no component results supplied")]
    NoComponents,

    #[error("component {component} has kind {kind}, which this estimator does not accept")]
    UnsupportedKind { component: usize, kind: &'static str },

    #[error("prior mass of secret {x} is not known exactly")]
    MissingPrior { x: i64 },

    #[error("component {component} samples secret {x} with zero importance mass")]
    ZeroImportanceMass { component: usize, x: i64 },

    #[error("pilot round is empty")]
    EmptyPilot,

    #[error("sample budget {budget} is below the required minimum {required}")]
    BudgetTooSmall { budget: u64, required: u64 },

    #[error("csv: {0}")]
    Csv(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
