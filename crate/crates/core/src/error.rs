use std::path::PathBuf;

use crate::field::Shape;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: Shape, found: Shape },

    #[error("field dimensions must be positive")]
    EmptyShape,

    #[error("field data length {found} does not match shape (expected {expected})")]
    Length { expected: usize, found: usize },

    #[error("field contains NaN or infinite values")]
    NonFinite,

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("dual variable leaves the unit ball (max magnitude {0})")]
    InfeasibleDual(f64),

    #[error("Poisson right-hand side is not zero-mean (mean {mean:e}, norm {norm:e})")]
    NonZeroMean { mean: f64, norm: f64 },

    #[error("trace has {found} full iterates, at least {required} are needed")]
    InsufficientTrace { found: usize, required: usize },

    #[error("H* proxy {proxy} exceeds the smallest traced energy {min_energy}")]
    ProxyAboveTrace { proxy: f64, min_energy: f64 },

    #[error("oracle instances are limited to 8x8, got {0}")]
    OracleTooLarge(Shape),

    #[error("invalid synthetic spec {spec:?}: {reason}")]
    Synthetic { spec: String, reason: String },

    #[error("{path}: {reason}")]
    Pgm { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
