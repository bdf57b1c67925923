use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown class table preset `{0}`")]
    UnknownPreset(String),

    #[error("invalid class table: {0}")]
    ClassTable(String),

    #[error("unknown class `{0}`")]
    UnknownClass(String),

    #[error("raster size mismatch: expected {expected_w}x{expected_h}, found {found_w}x{found_h}")]
    DimensionMismatch {
        expected_w: usize,
        expected_h: usize,
        found_w: usize,
        found_h: usize,
    },

    #[error("channel count mismatch: expected {expected}, found {found}")]
    ChannelMismatch { expected: usize, found: usize },

    #[error("buffer holds {found} elements, expected {expected}")]
    BufferLength { expected: usize, found: usize },

    #[error("label value {value} at pixel ({x}, {y}) is not a class id or the ignore id")]
    LabelOutOfRange { x: usize, y: usize, value: u8 },

    #[error("prediction contains the ignore id at pixel ({x}, {y})")]
    IgnoreInPrediction { x: usize, y: usize },

    #[error("non-finite value at pixel ({x}, {y}), channel {channel}")]
    NonFinite { x: usize, y: usize, channel: usize },

    #[error("no pixels with a class label; frequencies are undefined")]
    NoLabelledPixels,

    #[error("confusion matrix is empty")]
    EmptyConfusion,

    #[error("depth map has no valid pixels")]
    NoValidDepth,

    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("pool of {pool} samples cannot supply {requested} distinct images")]
    PoolTooSmall { pool: usize, requested: usize },

    #[error("crop {crop_w}x{crop_h} does not fit a {width}x{height} image")]
    CropTooLarge {
        crop_w: usize,
        crop_h: usize,
        width: usize,
        height: usize,
    },

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("logits file has bad magic {0:?}")]
    BadMagic([u8; 4]),

    #[error("logits file is version {0:?}, only LGT1 is supported")]
    UnsupportedVersion([u8; 4]),

    #[error("logits file truncated: header promises {expected} payload bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
