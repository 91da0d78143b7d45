//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed schema or configuration (wrong roles, bad parameters).
    #[error("schema error: {0}")]
    Schema(String),

    /// Input data failed a structural check while parsing.
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    /// Input data violated a documented precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// A column expected to vary is constant.
    #[error("constant column {0:?}: drop it during preprocessing first")]
    ConstantColumn(String),

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch} (loss non-finite); lower the learning rate")]
    Diverged { epoch: usize },

    /// A metric that needs both classes saw only one.
    #[error("labels contain a single class; need both positives and negatives")]
    SingleClass,

    /// A row or table is missing a feature the operation needs.
    #[error("feature mismatch: {0}")]
    FeatureMismatch(String),

    /// Brute-force attribution refuses large coalitions.
    #[error("coalition enumeration limited to {max} features, got {got}")]
    TooManyFeatures { max: usize, got: usize },

    /// A scorer failed while ranking a group.
    #[error("secondary scoring failed for group {group}: {message}")]
    ScorerFailed { group: usize, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
