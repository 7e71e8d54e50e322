use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("radius {radius} exceeds the available support {support}")]
    OutOfSupport { radius: f64, support: f64 },

    #[error("weight matrix needs {entries} entries, above the cap of {cap}")]
    MemoryExceeded { entries: u64, cap: u64 },

    #[error("evaluation domain is empty")]
    EmptyDomain,

    #[error("image distance {image_dist} mm does not exceed focal length {focal} mm")]
    NoRealFocus { focal: f64, image_dist: f64 },

    #[error("object lies at or behind the lens (d_f + delta = {0} mm)")]
    BehindLens(f64),

    #[error("singular configuration: {0}")]
    Singular(String),

    #[error("result diverges: {0}")]
    Divergence(String),

    #[error("image is {width}x{height}, needs at least {min_side} pixels per side")]
    ImageTooSmall {
        width: usize,
        height: usize,
        min_side: usize,
    },

    #[error("intensity {value} at ({x}, {y}) lies outside [0, 1]")]
    OutOfRange { value: f64, x: usize, y: usize },

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for errors caused by bad input rather than by the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::Image(_) | Error::Csv(_))
    }
}
