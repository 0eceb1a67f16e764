//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CasoError {
    #[error("empty graph")]
    EmptyGraph,

    #[error("empty membership network")]
    EmptyMembershipNetwork,

    #[error("series divergence risk: alpha = {alpha} requires alpha < 1/3")]
    SeriesDivergenceRisk { alpha: f64 },

    #[error("no intra pairs")]
    NoIntraPairs,

    #[error("no inter pairs")]
    NoInterPairs,

    #[error("no negatives: user {user} interacts with every community")]
    NoNegatives { user: usize },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {context}{}", detail.as_ref().map(|d| format!(": {d}")).unwrap_or_default())]
    NonFinite {
        context: String,
        detail: Option<String>,
    },

    #[error("invalid parameter {name}: {msg}")]
    InvalidParameter { name: String, msg: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CasoError>;

impl CasoError {
    pub fn invalid(name: &str, msg: impl Into<String>) -> Self {
        CasoError::InvalidParameter {
            name: name.to_string(),
            msg: msg.into(),
        }
    }

    pub fn parse(path: &str, line: usize, msg: impl Into<String>) -> Self {
        CasoError::Parse {
            path: path.to_string(),
            line,
            msg: msg.into(),
        }
    }
}
