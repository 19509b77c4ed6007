use thiserror::Error;

use crate::normal_form::ResonanceReport;

pub type Result<T> = std::result::Result<T, RomError>;

#[derive(Debug, Error)]
pub enum RomError {
    #[error("{context}: expected dimension {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("{context}: index {index} out of range for dimension {n}")]
    IndexOutOfRange {
        context: String,
        index: usize,
        n: usize,
    },

    #[error("tensor symmetry required: {0}")]
    NotSymmetric(String),

    #[error("mass matrix is not positive definite: leading minor of order {order} is not positive")]
    NotPositiveDefinite { order: usize },

    #[error("rigid-body or unstable mode {index}: eigenvalue {eigenvalue:e}")]
    RigidBodyMode { index: usize, eigenvalue: f64 },

    #[error("internal resonance within guard: {0}")]
    Resonance(ResonanceReport),

    #[error("1:1 resonance between master {master} and mode {slave} (|dw2|/w2 = {ratio:e})")]
    OneToOneResonance {
        master: usize,
        slave: usize,
        ratio: f64,
    },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("pole of {what} at rho = {rho}")]
    Pole { what: &'static str, rho: f64 },

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("model file {location}: {message}")]
    Ingestion { location: String, message: String },

    #[error("no convergence: {0}")]
    Convergence(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl RomError {
    pub(crate) fn dims(context: impl Into<String>, expected: usize, found: usize) -> Self {
        RomError::DimensionMismatch {
            context: context.into(),
            expected,
            found,
        }
    }

    pub(crate) fn ingestion(location: impl Into<String>, message: impl Into<String>) -> Self {
        RomError::Ingestion {
            location: location.into(),
            message: message.into(),
        }
    }
}
