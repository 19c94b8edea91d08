use std::path::PathBuf;

use thiserror::Error;

use crate::vae::VaeParams;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: schema error in column `{column}`: {message}")]
    Schema {
        path: PathBuf,
        column: String,
        message: String,
    },

    #[error("{path}: duplicate country `{country}` (rows {first_row} and {second_row})")]
    Conflict {
        path: PathBuf,
        country: String,
        first_row: usize,
        second_row: usize,
    },

    #[error("conflicting values for `{country}` field `{field}`: {first} vs {second}")]
    MergeConflict {
        country: String,
        field: String,
        first: f64,
        second: f64,
    },

    #[error("analytical matrix is empty: {0}")]
    EmptyMatrix(String),

    #[error("degenerate column `{0}`: zero variance")]
    DegenerateColumn(String),

    #[error("insufficient data for {what}: need {needed}, got {got}")]
    InsufficientData {
        what: String,
        needed: usize,
        got: usize,
    },

    #[error("infeasible clustering: {n} points for k = {k}")]
    Infeasible { n: usize, k: usize },

    #[error(
        "design matrix is rank deficient: column `{column}` is collinear with earlier columns"
    )]
    Collinearity { column: String },

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("training produced a non-finite loss at epoch {epoch}")]
    NonFinite {
        epoch: usize,
        last_finite: Box<VaeParams>,
    },

    #[error("evidence has zero probability under the network")]
    ZeroEvidence,

    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn insufficient(what: impl Into<String>, needed: usize, got: usize) -> Self {
        Error::InsufficientData {
            what: what.into(),
            needed,
            got,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
