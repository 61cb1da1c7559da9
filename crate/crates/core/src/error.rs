use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the fitting and explanation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("label column `{0}` not found in header")]
    UnknownLabelColumn(String),

    #[error("label column has {found} distinct value(s); exactly two are required")]
    SingleClass { found: usize },

    #[error("class {class} has only {count} instance(s); at least {required} required")]
    TooFewInstances {
        class: usize,
        count: usize,
        required: usize,
    },

    #[error("{bad_rows} row(s) contain missing or non-numeric feature cells; first at line {line}, column `{column}`: `{value}`")]
    NonNumeric {
        bad_rows: usize,
        line: usize,
        column: String,
        value: String,
    },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("graph contains a cycle through node {0}")]
    Cycle(usize),

    #[error("node index {index} out of range for {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("malformed DAG file line {line}: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("class {class}, node {node}: {rows} rows cannot fit {params} parameters")]
    InsufficientRows {
        class: usize,
        node: usize,
        rows: usize,
        params: usize,
    },

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("quadratic set unsupported in MILP path (p = 2)")]
    QuadraticNormUnsupported,

    #[error("invalid MILP model: {0}")]
    InvalidModel(String),

    #[error("empty scenario set")]
    EmptyScenarioSet,

    #[error("factual instance is already classified as class 1 (H = {h:.6}, threshold {threshold:.6})")]
    AlreadyPositive { h: f64, threshold: f64 },

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("solver failure: {0}")]
    Solver(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
