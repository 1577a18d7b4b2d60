use thiserror::Error;

/// Broad failure class, used by the command line to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Training,
    Prerequisite,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {left} vs {right}")]
    ShapeMismatch { left: String, right: String },
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("mask is not binary: value {value} at index {index}")]
    NonBinaryMask { value: f32, index: usize },
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error("unknown architecture `{0}`; valid options: aotgan, deepfillv2, edgeconnect, lama")]
    UnknownArch(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{component} loss became non-finite at iteration {iteration}; parameters restored to the last good checkpoint")]
    Diverged { component: String, iteration: usize },
    #[error("training error: {0}")]
    Training(String),
    #[error("input is {got}, encoder expects {expected}")]
    InputSize { expected: String, got: String },
    #[error("unknown layer `{layer}`; valid layers: {valid}")]
    UnknownLayer { layer: String, valid: String },
    #[error("model has no encoder boundary tag")]
    MissingBoundary,
    #[error("missing {what}; run `{command}` first")]
    MissingPrerequisite { what: String, command: &'static str },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Candle(#[from] candle_core::Error),
    #[error(transparent)]
    Analytics(#[from] patreid_analytics::AnalyticsError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Safetensors(#[from] safetensors::SafeTensorError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_) | Error::UnknownArch(_) | Error::UnknownLayer { .. } => ErrorCategory::Config,
            Error::ShapeMismatch { .. }
            | Error::InvalidImage(_)
            | Error::NonBinaryMask { .. }
            | Error::Dataset(_)
            | Error::InputSize { .. }
            | Error::Image(_)
            | Error::Csv(_)
            | Error::Analytics(_) => ErrorCategory::Data,
            Error::Diverged { .. } | Error::Training(_) | Error::Candle(_) | Error::MissingBoundary => {
                ErrorCategory::Training
            }
            Error::MissingPrerequisite { .. } => ErrorCategory::Prerequisite,
            Error::Checkpoint(_) | Error::Io { .. } | Error::Safetensors(_) | Error::Json(_) => ErrorCategory::Io,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
