use std::path::PathBuf;
use thiserror::Error;

/// Crate-wide error type. Variants are grouped by the layer that raises them:
/// grid construction, radial solver, field assembly, solver control, file I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid resolution must be a power of two and at least 8, got {0}")]
    BadResolution(usize),

    #[error("grid half-width must be positive and finite, got {0}")]
    BadHalfWidth(f64),

    #[error("grids disagree: {0}")]
    GridMismatch(String),

    #[error("array shape {got:?} does not match grid {expected:?}")]
    ShapeMismatch { expected: (usize, usize), got: (usize, usize) },

    #[error("field contains a non-finite sample")]
    NonFiniteField,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shooting bracket does not straddle the ground state: {0}")]
    BracketFailure(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("zero field where a normalizable state is required")]
    ZeroField,

    #[error("under-resolved: {0}")]
    UnderResolved(String),

    #[error("requested frame leaves the source domain: {0}")]
    FrameOverflow(String),

    #[error("bad magic bytes in field file (expected \"PSN1\")")]
    BadMagic,

    #[error("unsupported field file version {0}")]
    UnsupportedVersion(u32),

    #[error("truncated field file: expected {expected} payload bytes, found {got}")]
    TruncatedPayload { expected: usize, got: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
