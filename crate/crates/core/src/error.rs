use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A distribution parameter is invalid; names the offending field.
    #[error("invalid distribution: field `{field}`: {reason}")]
    Distribution { field: &'static str, reason: String },

    /// A system configuration is structurally invalid.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A scenario file failed validation; every violation is listed.
    #[error("scenario validation failed:\n{}", .0.join("\n"))]
    ScenarioValidation(Vec<String>),

    #[error("scenario parse error: {0}")]
    ScenarioParse(#[from] toml::de::Error),

    /// An estimator was asked for more batches than the window supports.
    #[error("{0}; use a longer horizon or fewer batches")]
    Estimation(String),

    /// The stationary solver did not converge within its iteration cap.
    #[error(
        "stationary solve did not converge after {iterations} iterations (residual {residual:e})"
    )]
    CtmcConvergence { iterations: u64, residual: f64 },

    #[error("station index {index} out of range (system has {count} stations)")]
    StationIndex { index: usize, count: usize },

    /// The simulator detected an internal state inconsistency.
    #[error("simulation fault: {0}")]
    SimFault(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
