use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("matrix is not positive semidefinite: minimum eigenvalue {min_eigenvalue:e} below tolerance -{tolerance:e}")]
    NotPsd { min_eigenvalue: f64, tolerance: f64 },

    #[error("numeric failure in {context}: {report}")]
    Numeric { context: &'static str, report: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid representation: {0}")]
    InvalidRepresentation(String),

    #[error("arc has zero measure")]
    ZeroMeasureArc,

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("quadrature under-resolved: {nodes} nodes, configured floor is {floor}")]
    UnderResolved { nodes: usize, floor: usize },

    #[error("splitting mismatch: |f - (g + h)| = {residual:e}")]
    SplittingMismatch { residual: f64 },

    #[error("every witness has zero BMO norm")]
    DegenerateWitnesses,

    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
