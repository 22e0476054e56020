use std::path::PathBuf;

use heatsource_core::Error as CoreError;

/// Failure classes of a run, each with its own exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Help or version text requested; not a failure.
    #[error("{0}")]
    Help(String),
    #[error("{0}")]
    Usage(String),
    #[error("config file {} not found", .0.display())]
    MissingFile(PathBuf),
    #[error("{origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("{0}")]
    Range(String),
    #[error("not converged after {iterations} iterations (cost {cost:e})")]
    NotConverged { iterations: usize, cost: f64 },
    #[error("diverged: {0}")]
    Divergence(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Help(_) => 0,
            CliError::Failed(_) => 1,
            CliError::Usage(_) => 2,
            CliError::MissingFile(_) => 3,
            CliError::Parse { .. } => 4,
            CliError::Range(_) => 5,
            CliError::NotConverged { .. } => 6,
            CliError::Divergence(_) => 7,
            CliError::Io(_) => 8,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Domain { .. } | CoreError::Invalid(_) | CoreError::Shape { .. } => {
                CliError::Range(e.to_string())
            }
            CoreError::Divergence { .. } => CliError::Divergence(e.to_string()),
            CoreError::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::Failed(other.to_string()),
        }
    }
}
