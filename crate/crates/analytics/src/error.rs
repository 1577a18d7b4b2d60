use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("empty input")]
    Empty,
    #[error("requested {dims} components but at most {max} are available (min(N, D))")]
    DimsTooLarge { dims: usize, max: usize },
    #[error("need at least k = {k} points, got {n}")]
    TooFewPoints { n: usize, k: usize },
    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("{metric} is undefined: {reason}")]
    Undefined { metric: &'static str, reason: String },
    #[error("projection method `{0}` is not available in this build; use `pca` instead")]
    UnavailableMethod(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("non-finite value in input at row {row}")]
    NonFinite { row: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, AnalyticsError>;
