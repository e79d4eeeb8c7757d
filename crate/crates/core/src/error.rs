use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid mass function: {0}")]
    InvalidMass(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("conditioning marginal is zero at index {index}")]
    ZeroConditioning { index: usize },

    #[error("product space has {entries} entries, above the cap of {cap}; use fewer atoms or marginals")]
    EntryCap { entries: usize, cap: usize },

    #[error("non-finite value in linear program input ({0})")]
    NonFinite(&'static str),

    #[error("simplex exceeded the pivot limit of {0}")]
    PivotLimit(usize),

    #[error("eigenvalue iteration did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("unsupported parameter: {0}")]
    Unsupported(String),

    #[error("incompatible marginals: {0}")]
    IncompatibleMarginals(String),

    #[error("construction failed validation: {0}")]
    Construction(String),

    #[error("degenerate graph: {0}")]
    DegenerateGraph(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("isolated vertices {0:?}")]
    IsolatedVertices(Vec<usize>),

    #[error("config key `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Json(#[from] serde_json::Error),

    #[error("{0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
