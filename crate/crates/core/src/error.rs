use thiserror::Error;

use crate::model::SolveReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or shape-incompatible input data.
    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// The requested solver cannot handle the problem structure.
    #[error("unsupported problem structure: {0}")]
    Capability(String),

    #[error("no feasible assignment exists")]
    Infeasible,

    /// The time limit fired; `incumbent` holds the best assignment found so far.
    #[error("time limit of {limit_secs:.1}s exceeded")]
    Timeout {
        limit_secs: f64,
        incumbent: Option<Box<SolveReport>>,
    },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
