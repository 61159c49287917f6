use alloc::string::String;

use crate::image::Dims;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: Dims, right: Dims },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("image {dims} is smaller than the {window}x{window} window")]
    ImageTooSmall { dims: Dims, window: usize },

    #[error("eigendecomposition did not converge at pixel {pixel}")]
    SolveFailed { pixel: usize },

    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),

    #[error("fixed-metric gradient vanished (squared norm {0:e}); level set undefined")]
    DegenerateGradient(f64),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SolveFailed { .. } | Error::NonFinite(_) | Error::DegenerateGradient(_)
        )
    }
}
