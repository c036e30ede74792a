use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error at {path}: {message}")]
    Validation { path: String, message: String },
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Invalid input detected by the numerical core.
    #[error("invalid input: {0}")]
    Model(qps_core::Error),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => 2,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Parse(_) => "parse",
            CliError::Validation { .. } => "validation",
            CliError::Io { .. } => "io",
            CliError::Model(_) => "model",
            CliError::Numerical(_) => "numerical",
        }
    }
}

impl From<qps_core::Error> for CliError {
    fn from(e: qps_core::Error) -> Self {
        use qps_core::Error as E;
        match e {
            E::QuadratureNotConverged { .. } | E::GridTooCoarse { .. } | E::AllMasked { .. } | E::SingularMatrix { .. } => {
                CliError::Numerical(e.to_string())
            }
            other => CliError::Model(other),
        }
    }
}
