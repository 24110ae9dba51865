use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("grid specifications differ")]
    SpecMismatch,

    #[error("lambda must be nonzero")]
    ZeroLambda,

    #[error("operation is defined for the λ = 1 kernel, got λ = {0}")]
    RequiresUnitLambda(f64),

    #[error("operation requires a phase-plane function, got {0}")]
    NotPhasePlane(&'static str),

    #[error("grid misalignment: {0}")]
    GridMisalignment(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("window of {requested} indices exceeds cap {cap}")]
    WindowTooLarge { requested: usize, cap: usize },

    #[error("canonical dual refused: {reason} (min weight {min_weight:.3e}, eps {eps:.1e})")]
    DualRefused {
        min_weight: f64,
        eps: f64,
        reason: String,
    },

    #[error("prerequisite not verified: {0}")]
    PrerequisiteUnverified(String),

    #[error("function has no separable metadata and interpolation is disabled")]
    NonSeparable,

    #[error("unknown example id {0} (expected 1..=6)")]
    UnknownExample(u32),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
