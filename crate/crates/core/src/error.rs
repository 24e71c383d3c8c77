use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("pole at {0}")]
    Pole(String),
    #[error("series did not converge: {0}")]
    Convergence(String),
    #[error("argument outside domain: {0}")]
    Domain(String),
    #[error("quadrature tolerance not reached: {0}")]
    Quadrature(String),
    #[error("oscillatory integral did not converge: {0}")]
    NonConvergence(String),
    #[error("amplitude evaluation failed: {0}")]
    Evaluation(String),
    #[error("alpha = {0} is not supported here")]
    UnsupportedAlpha(f64),
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error("parameters outside the kernel theorem range: {0}")]
    OutOfTheoremRange(String),
    #[error("tail bound too large: {0}")]
    Tail(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("non-positive magnitude at sample {0}")]
    NonPositiveMagnitude(usize),
    #[error("eigendecomposition failed: {0}")]
    Eigen(String),
    #[error("not implemented: {0}")]
    Unimplemented(String),
}

pub type Result<T> = std::result::Result<T, Error>;
