use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by configuration, channel generation, the solvers and the
/// benchmark harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("user {user} sits at the base station (zero distance)")]
    ZeroDistance { user: usize },

    #[error("geometry has {got} users but the configuration expects {expected}")]
    GeometryMismatch { expected: usize, got: usize },

    #[error("warm start is infeasible: {0}")]
    InfeasibleStart(String),

    #[error("support leaves user {user} without any subcarrier")]
    InfeasibleSupport { user: usize },

    #[error("no support pattern with at most {cap} users per subcarrier covers all users")]
    NoFeasiblePattern { cap: usize },

    #[error(
        "enumeration needs {count} support patterns, budget is {budget}; use a smaller instance"
    )]
    EnumerationBudget { count: u128, budget: u128 },

    #[error("linear algebra failure: {0}")]
    Numerical(String),

    #[error("result table is empty")]
    EmptyTable,

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
