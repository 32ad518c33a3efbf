use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network shape: {0}")]
    Shape(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("non-finite value in `{term}`{}", index.map(|i| format!(" at index {i}")).unwrap_or_default())]
    NonFinite { term: String, index: Option<usize> },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("optimizer `{0}` is not bundled; supply its update rule as a plug-in")]
    NotBundled(String),

    #[error("linear solve did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("unknown config keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),

    #[error("bad file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn non_finite(term: impl Into<String>, index: Option<usize>) -> Self {
        Error::NonFinite {
            term: term.into(),
            index,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
