use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("keypoint {index}: {source}")]
    Keypoint {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {message}", path.display())]
    File { path: PathBuf, message: String },

    #[error("stage `{stage}`{}: {source}", sample_suffix(.sample))]
    Stage {
        stage: &'static str,
        sample: Option<usize>,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

fn sample_suffix(sample: &Option<usize>) -> String {
    match sample {
        Some(i) => format!(" (sample {i})"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn file(path: impl Into<PathBuf>, msg: impl std::fmt::Display) -> Self {
        Error::File {
            path: path.into(),
            message: msg.to_string(),
        }
    }

    /// Tags an error with the pipeline stage (and optionally the sample) it came from.
    pub fn at_stage(self, stage: &'static str, sample: Option<usize>) -> Self {
        Error::Stage {
            stage,
            sample,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
