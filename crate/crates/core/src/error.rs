use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("vectors belong to different spaces")]
    MixedSpaces,

    #[error("value out of range: {0}")]
    Range(String),

    #[error("operation undefined for the zero vector")]
    ZeroVector,

    #[error("non-finite coordinate at index {0}")]
    NonFinite(usize),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("tuple of {n} vectors exceeds dimension {d}")]
    Rank { n: usize, d: usize },

    #[error("family is linearly dependent (|Gram determinant| = {gram_det:e})")]
    DependentFamily { gram_det: f64 },

    #[error("unsupported size: {0}")]
    UnsupportedSize(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("functional is not antisymmetric (worst violation {violation:e})")]
    NotAntisymmetric { violation: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
