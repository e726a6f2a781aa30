use std::path::PathBuf;

/// Errors produced by the numerical routines and the experiment harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed input file (ragged rows, non-numeric cells).
    #[error("format error: {0}")]
    Format(String),

    /// Inputs that violate a documented precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// The normal-equation matrix was numerically rank deficient.
    #[error("singular system: estimated rank {rank} < {required}")]
    Singular { rank: usize, required: usize },

    #[error("test row {row}: {source}")]
    AtTestRow {
        row: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("cluster {cluster}: {source}")]
    InCluster {
        cluster: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{stage} stage: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_test_row(self, row: usize) -> Self {
        Error::AtTestRow {
            row,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_cluster(self, cluster: usize) -> Self {
        Error::InCluster {
            cluster,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error once context wrappers are stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtTestRow { source, .. } | Error::InCluster { source, .. } | Error::Stage { source, .. } => {
                source.root()
            }
            other => other,
        }
    }

    /// True when the root cause is a bad input rather than a numerical or I/O failure.
    pub fn is_validation(&self) -> bool {
        matches!(self.root(), Error::Validation(_) | Error::Format(_))
    }
}
