use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{field} = {value} is out of range: expected {expected}")]
    OutOfRange {
        field: &'static str,
        value: String,
        expected: &'static str,
    },
    #[error("cannot parse {field} from {value:?}: expected {expected}")]
    Parse {
        field: &'static str,
        value: String,
        expected: &'static str,
    },
    #[error("invalid payoff matrix: {0}")]
    Payoffs(String),
    #[error("invalid sweep: {0}")]
    Sweep(String),
}

impl ConfigError {
    pub fn out_of_range(field: &'static str, value: impl ToString, expected: &'static str) -> Self {
        ConfigError::OutOfRange {
            field,
            value: value.to_string(),
            expected,
        }
    }

    /// Name of the offending field, when there is one.
    pub fn field(&self) -> Option<&'static str> {
        match self {
            ConfigError::OutOfRange { field, .. } | ConfigError::Parse { field, .. } => Some(field),
            ConfigError::Payoffs(_) => Some("payoffs"),
            ConfigError::Sweep(_) => None,
        }
    }
}

/// Caller broke an operation's precondition.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ContractViolation {
    #[error("cannot select an eviction victim from an empty memory")]
    EmptyMemory,
    #[error("cannot aggregate an empty recommender set")]
    EmptyRecommenderSet,
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
}
