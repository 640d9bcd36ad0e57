use alloc::string::String;

use crate::tensor::FormatError;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("image too small: {height}x{width} (need at least 3x3)")]
    ImageTooSmall { height: usize, width: usize },
    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("probability map not normalized at pixel {pixel}: sum {sum}")]
    NotNormalized { pixel: usize, sum: f32 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("region {region} out of range (region count {count})")]
    RegionOutOfRange { region: u32, count: u32 },
    #[error("region {region} of image {image} is already fully revealed")]
    AlreadyRevealed { image: usize, region: u32 },
    #[error("no labeled pixels to train on")]
    NoLabeledPixels,
    #[error("prediction provider failed on image {image}: {message}")]
    Provider { image: usize, message: String },
    #[error("unknown strategy: {0}")]
    UnknownStrategy(String),
    #[error(transparent)]
    Format(#[from] FormatError),
}

impl Error {
    pub(crate) fn shape(context: &'static str, expected: impl core::fmt::Debug, found: impl core::fmt::Debug) -> Self {
        Error::ShapeMismatch {
            context,
            expected: alloc::format!("{expected:?}"),
            found: alloc::format!("{found:?}"),
        }
    }
}
