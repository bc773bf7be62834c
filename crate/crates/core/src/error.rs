use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = KgError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum KgError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// The requested relational reduction cannot keep every entity and
    /// relation covered.
    #[error(
        "infeasible reduction: alpha={alpha} asks for {target} training triples but covering \
         every entity and relation needs {min_cover}; the largest feasible alpha is {max_alpha:.6}"
    )]
    Infeasible {
        alpha: f64,
        target: usize,
        min_cover: usize,
        max_alpha: f64,
    },

    #[error("non-finite loss {loss} at epoch {epoch}, batch {batch}: {detail}")]
    NonFinite {
        loss: f64,
        epoch: usize,
        batch: usize,
        detail: String,
    },

    #[error("{0}")]
    Domain(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl KgError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        KgError::Io {
            path: path.into(),
            source,
        }
    }

    /// Short, stable category name used by the command line front end.
    pub fn category(&self) -> &'static str {
        match self {
            KgError::Parse { .. } => "parse",
            KgError::Io { .. } => "io",
            KgError::Config(_) => "config",
            KgError::Infeasible { .. } => "infeasible",
            KgError::NonFinite { .. } => "numerical",
            KgError::Domain(_) => "domain",
            KgError::Checkpoint(_) => "checkpoint",
        }
    }
}
