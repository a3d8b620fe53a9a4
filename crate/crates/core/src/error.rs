use std::path::PathBuf;

/// Errors produced anywhere in the segmentation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("unexpected end of image data")]
    TruncatedImage,

    #[error("unsupported bit depth: {0}")]
    UnsupportedBitDepth(String),

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("ambiguous seed value {value} at pixel {index}")]
    AmbiguousSeed { value: u8, index: usize },

    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("both seed classes required")]
    MissingSeedClass,

    #[error("conflicting seed at pixel {0}")]
    ConflictingSeed(usize),

    #[error("variable {0} is unlabeled")]
    UnlabeledVariable(usize),

    #[error("energy scale too large")]
    ScaleTooLarge,

    #[error("too many variables for exhaustive search: {0} (limit {limit})", limit = crate::synthcorpus::BRUTE_FORCE_LIMIT)]
    TooManyVariables(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
