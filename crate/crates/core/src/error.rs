use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index ({i}, {j}, {k}) outside grid of {nx}x{ny}x{nt} cells")]
    IndexOutOfRange {
        i: usize,
        j: usize,
        k: usize,
        nx: usize,
        ny: usize,
        nt: usize,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown scenario `{0}` (expected `snowmobile` or `M1`)")]
    UnknownScenario(String),

    #[error("empty point set: {0}")]
    EmptyPointSet(&'static str),

    #[error("conjugate gradient stopped after {iterations} iterations with relative residual {residual:e}")]
    SolverFailure { iterations: usize, residual: f64 },

    #[error("non-finite loss value {0}")]
    NonFinite(f64),

    #[error("training aborted at iteration {iteration}: {source}")]
    TrainingAborted {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("need at least 3 records with an error estimate, got {0}")]
    TooFewRecords(usize),

    #[error("output directory {0} already exists (pass overwrite to replace it)")]
    OutputExists(PathBuf),

    #[error("malformed {what}: {detail}")]
    Parse { what: &'static str, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
