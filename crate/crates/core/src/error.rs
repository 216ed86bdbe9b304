use thiserror::Error;

/// Error type shared across the engine.
///
/// Variants are grouped by the failure domain so callers (notably the CLI)
/// can map them onto coarse outcome classes without string matching.
#[derive(Debug, Error)]
pub enum Error {
    /// Two operands with incompatible shapes reached a tensor operation.
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    /// A single operand or a requested output shape is malformed.
    #[error("{op}: {message}")]
    InvalidShape { op: &'static str, message: String },

    /// Operands from two different tapes were combined.
    #[error("graph error: {0}")]
    Graph(String),

    /// A non-finite value appeared during evaluation; `stage` names the
    /// first pipeline stage that produced it.
    #[error("numeric error in {stage}: {message}")]
    Numeric { stage: String, message: String },

    /// Malformed input text; `line` is 1-based and counts the header.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Structurally valid input whose content cannot be used.
    #[error("data error: {0}")]
    Data(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("training error: {0}")]
    Train(String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
