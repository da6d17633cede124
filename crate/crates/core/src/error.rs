use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = GoalError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GoalError {
    /// Bad solver, split, grid or run configuration.
    #[error("{0}")]
    Config(String),

    /// Input data or matrix arguments violate a contract (shape, finiteness, stochasticity).
    #[error("{0}")]
    InvalidInput(String),

    /// A metric is undefined for the given inputs (e.g. AUC with a single class).
    #[error("{0}")]
    UndefinedMetric(String),

    /// The solver produced a non-finite value.
    #[error("{0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl GoalError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        GoalError::Config(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        GoalError::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GoalError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        GoalError::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Short machine-readable code used on the CLI error line.
    pub fn code(&self) -> &'static str {
        match self {
            GoalError::Config(_) => "config",
            GoalError::InvalidInput(_) | GoalError::Format { .. } => "data",
            GoalError::UndefinedMetric(_) => "metric",
            GoalError::Numerical(_) => "numerical",
            GoalError::Io { .. } => "io",
        }
    }

    /// Process exit status: 2 configuration, 3 data validation, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            GoalError::Config(_) => 2,
            GoalError::InvalidInput(_)
            | GoalError::Format { .. }
            | GoalError::UndefinedMetric(_)
            | GoalError::Io { .. } => 3,
            GoalError::Numerical(_) => 4,
        }
    }
}
