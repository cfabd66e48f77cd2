use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Invalid parameters or inputs detected before any computation.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid particle: {0}")]
    InvalidParticle(String),

    #[error("non-finite field value: {0}")]
    NonFiniteField(String),

    #[error("numerical blowup at step {step}: {detail}")]
    NumericalBlowup { step: usize, detail: String },

    /// The reconstructed solution has zero discrete L¹ mass, so it cannot be resampled.
    #[error("degenerate solution: {0}")]
    DegenerateSolution(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("boundary contamination: edge magnitude {edge:.3e} exceeds {limit:.3e}")]
    BoundaryContamination { edge: f64, limit: f64 },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
