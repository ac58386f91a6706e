//! Error type shared by every pipeline stage.

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by ingestion, modelling, training and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A record could not be decoded.
    #[error("parse error in {context} at frame {frame}: {message}")]
    Parse {
        context: String,
        frame: usize,
        message: String,
    },

    /// A record decoded but violates the keypoint layout.
    #[error("format error in {context} at frame {frame}: {message}")]
    Format {
        context: String,
        frame: usize,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("dimension error in {layer}: {message}")]
    Dimension { layer: String, message: String },

    #[error("schedule error: {0}")]
    Schedule(String),

    #[error("no clip predictions for video {0}")]
    EmptyVote(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dim(layer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Dimension {
            layer: layer.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad user input rather than a runtime fault.
    pub fn is_user_error(&self) -> bool {
        match self {
            Error::Io { source, .. } => source.kind() == std::io::ErrorKind::NotFound,
            Error::Parse { .. }
            | Error::Format { .. }
            | Error::Validation(_)
            | Error::Config(_)
            | Error::Schedule(_)
            | Error::Json(_)
            | Error::Csv(_) => true,
            Error::Dimension { .. } | Error::EmptyVote(_) | Error::Checkpoint(_) => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
