use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DrtalkError {
    /// Bad input: malformed scenario, invalid parameter or option.
    #[error("{context}: {message}")]
    Validation { context: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("writing csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] drtalk_core::Error),
}

impl DrtalkError {
    pub fn validation(context: impl Into<String>, message: impl Into<String>) -> Self {
        DrtalkError::Validation {
            context: context.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DrtalkError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for invalid input, 3 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            DrtalkError::Validation { .. } => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, DrtalkError>;
