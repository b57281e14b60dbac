use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A model parameter outside its admissible domain.
    #[error("invalid {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not symmetric (max |a_ij - a_ji| = {max_asymmetry:e}, scale {scale:e})")]
    NotSymmetric { max_asymmetry: f64, scale: f64 },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e}, target {target:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        target: f64,
    },

    #[error("extrapolation needs at least {need} samples, got {got}")]
    TooFewSamples { got: usize, need: usize },

    #[error("duplicate truncation size N = {0} in extrapolation samples")]
    DuplicateTruncation(usize),

    #[error("truncation size N = {n} is below the minimum {min}")]
    TruncationTooSmall { n: usize, min: usize },

    #[error("time grid point t/T = {0} lies outside [-0.6, 0.6]")]
    GridOutOfRange(f64),

    #[error("time grid does not cover the window [-1/2, 1/2] with at least {need} points")]
    InsufficientCoverage { need: usize },
}

impl Error {
    /// True for errors caused by bad inputs rather than numerical failure.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::NoConvergence { .. })
    }
}
