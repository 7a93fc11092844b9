use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("order {order} exceeds supported limit {max}")]
    OrderLimit { order: usize, max: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("section {section} has {have} samples, needs at least {need}")]
    InsufficientSamples { section: usize, have: usize, need: usize },

    #[error("ill-conditioned least-squares problem: {0}")]
    Conditioning(String),

    #[error("unknown signal `{0}`")]
    UnknownSignal(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("schema error: missing column `{0}`")]
    MissingColumn(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("dataset too small: {0}")]
    Size(String),

    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    #[error("expression uses {features} features, at most {max} supported")]
    Dimensionality { features: usize, max: usize },

    #[error("expression syntax error: {0}")]
    Syntax(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
