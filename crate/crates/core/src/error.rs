use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config parse error: {0}")]
    Parse(String),

    /// A config value violates its documented bound. `field` is the dotted key.
    #[error("invalid config field `{field}`: {reason}")]
    InvalidField { field: String, reason: String },

    #[error("distance must be positive, got {0} m")]
    NonPositiveDistance(f64),

    #[error("migration of {tasks} tasks requested at MIS {mis} with zero backhaul rate")]
    InfeasibleMigration { mis: usize, tasks: u64 },

    #[error("infeasible decision: {0}")]
    Infeasible(String),

    #[error("enumeration of {size} candidates exceeds budget {budget}")]
    BudgetExceeded { size: u128, budget: u128 },

    #[error("csv output error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json output error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn field(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidField {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
