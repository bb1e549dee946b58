use std::path::PathBuf;

use sacl_core::curriculum::PlanError;
use sacl_core::imagemetrics::MetricsError;
use sacl_core::manifest::ManifestError;
use sacl_core::sampler::SampleError;
use sacl_core::simharness::SimError;
use sacl_core::splitter::SplitError;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Image { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Document {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: {source}")]
    Record {
        line: usize,
        #[source]
        source: ManifestError,
    },
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("slice {slice_id:?}: {source}")]
    Metrics {
        slice_id: String,
        #[source]
        source: MetricsError,
    },
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Usage(String),
    #[error("fidelity check failed: {0}")]
    Fidelity(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for anything that failed reading or writing files, 64 for bad
    /// invocations, 1 for validation failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Image { .. } => 2,
            Error::Usage(_) => 64,
            _ => 1,
        }
    }
}
