use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("non-finite sample at node {index}")]
    NonFiniteSample { index: usize },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("fields are defined on different domains")]
    DomainMismatch,

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("invalid IVC range: {0}")]
    InvalidIvcSpec(String),

    #[error("no samples to estimate a density from")]
    EmptySamples,

    #[error("density estimates use different abscissae")]
    AbscissaMismatch,

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("loss became non-finite at step {step}")]
    NonFiniteLoss { step: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("interpolation node count {nodes} exceeds grid count {counts} on axis {axis}")]
    NodeCountExceedsGrid {
        axis: usize,
        nodes: usize,
        counts: usize,
    },

    #[error("incompatible architectures: {0}")]
    IncompatibleArchitectures(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
