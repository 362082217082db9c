use num_complex::Complex64;
use thiserror::Error;

/// Errors raised while reading or validating a family configuration.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("invalid field `{field}`: {message}")]
    Semantic { field: String, message: String },
}

impl ConfigError {
    pub(crate) fn semantic(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Semantic {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("eigenvalue iteration did not converge for {n}x{n} matrix {matrix:?}")]
    NoConvergence { n: usize, matrix: Vec<Complex64> },

    #[error("matrix is not square symmetric: {0}")]
    NotSymmetric(String),

    #[error("unsupported dimension {0} (expected 2..=64)")]
    Dimension(usize),

    #[error("basis is not orthonormal (deviation {deviation:.3e})")]
    NonOrthonormalBasis { deviation: f64 },

    #[error("zero eigenvector")]
    ZeroVector,

    #[error("root finding did not converge after {} iterations (last iterate {:?})", history.len(), history.last())]
    RootNotConverged { history: Vec<Complex64> },

    #[error("higher-order degeneracy at a = {a}: {count} eigenvalues coincide")]
    HigherOrderDegeneracy { a: Complex64, count: usize },

    #[error("state matching is ambiguous (confidence {confidence:.3e}); refine the parameter step")]
    AmbiguousMatch { confidence: f64 },

    #[error("loop passes within {distance:.3e} of a degeneracy near a = {near}")]
    LoopTooClose { near: Complex64, distance: f64 },

    #[error("tracking fault on [{a_from}, {a_to}]: eigenvalue jump {jump:.3e} exceeds bound {bound:.3e}")]
    TrackingFault {
        a_from: f64,
        a_to: f64,
        jump: f64,
        bound: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("contour passes through a zero of the discriminant near {0}")]
    ZeroOnContour(Complex64),
}

pub type Result<T> = std::result::Result<T, Error>;
