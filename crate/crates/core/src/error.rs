use thiserror::Error;

/// Errors raised by the spectral and KAM machinery.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum KamError {
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("axis {axis} out of range for a {dim}-dimensional torus")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("grid of {n} points per axis cannot resolve modes up to |k_i| = {kmax} (need at least {})", 2 * kmax + 1)]
    UnderResolved { n: usize, kmax: usize },

    #[error("small divisor {divisor:.3e} at k = {k:?} is below the floor")]
    DivisorTooSmall { k: Vec<i64>, divisor: f64 },

    #[error("frame singular: DK^T DK is numerically singular (condition {condition:.3e})")]
    FrameSingular { condition: f64 },

    #[error("non-degeneracy condition violated: |det| = {det:.3e} below threshold {threshold:.3e}")]
    NonDegeneracyFailure { det: f64, threshold: f64 },

    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        trace: Vec<f64>,
    },

    #[error("normalization diverged: |sigma| = {sigma:.3e} left the trust region")]
    NormalizationDiverged { sigma: f64 },

    #[error("jet base points differ: {left} vs {right}")]
    BasePointMismatch { left: String, right: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, KamError>;
