use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by estimation, policies, validation and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("MLE did not converge after {iterations} iterations (score norm {score_norm:.3e})")]
    NonConvergent { iterations: usize, score_norm: f64 },

    #[error("Fisher matrix is singular (minimum eigenvalue {min_eigenvalue:.3e})")]
    SingularFisher { min_eigenvalue: f64 },

    #[error("design matrix is numerically singular (minimum eigenvalue {min_eigenvalue:.3e})")]
    SingularDesign { min_eigenvalue: f64 },

    #[error("weight matrix is not positive definite (x'Ax = {quadratic_form:.3e})")]
    NonPositiveDefinite { quadratic_form: f64 },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) | Error::Parse { .. } => 1,
            Error::Io { .. } => 2,
            Error::NonConvergent { .. }
            | Error::SingularFisher { .. }
            | Error::SingularDesign { .. }
            | Error::NonPositiveDefinite { .. } => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
