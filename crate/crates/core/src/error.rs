use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The cut solver exhausted its iteration budget.
    #[error("cut solver did not converge after {iterations} iterations (residuals {residuals:?})")]
    Convergence {
        iterations: usize,
        residuals: Vec<f64>,
    },

    /// The solver reached a non-physical state.
    #[error("model-domain error: {0}")]
    ModelDomain(String),

    /// Malformed active-inactive genotype or mismatched lengths.
    #[error("structural error: {0}")]
    Structural(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("schema error in {path}: {message}")]
    Schema { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn schema(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Structural(_) | Error::Config(_) => 1,
            Error::Io { .. } | Error::Schema { .. } => 2,
            Error::Convergence { .. } | Error::ModelDomain(_) => 3,
        }
    }
}
