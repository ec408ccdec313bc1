use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("empty video")]
    EmptyVideo,

    #[error("frame {index} invalid: {reason}")]
    BadFrame { index: usize, reason: String },

    #[error("sequence i/o error at {path}: {reason}")]
    SequenceIo { path: PathBuf, reason: String },

    #[error("degenerate sampling: only {distinct} distinct grid sites (need at least {min})")]
    DegenerateSampling { distinct: usize, min: usize },

    #[error("non-finite objective at iteration {iter}: measurements may be corrupted")]
    NonFiniteObjective { iter: usize },

    #[error("no seed points to track")]
    NoSeeds,

    #[error("invalid trajectory cannot be converted to displacements")]
    InvalidTrajectory,

    #[error("{0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
