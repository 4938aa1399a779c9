use thiserror::Error;

/// Errors produced by the segmentation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("degenerate image: {0}")]
    DegenerateImage(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty search range for threshold {index}")]
    EmptySearchRange { index: usize },

    #[error("contour too short: need at least {needed} points, got {got}")]
    ContourTooShort { needed: usize, got: usize },

    #[error("phantom placement failed: {0}")]
    Placement(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T> = std::result::Result<T, Error>;
