//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors returned by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no solution: {0}")]
    NoSolution(String),

    /// The requested tolerance was not reached. `value` is the best estimate available.
    #[error("accuracy not met: value {value} with error estimate {error:e} (requested {requested:e})")]
    AccuracyNotMet { value: f64, error: f64, requested: f64 },

    /// The constant diverges for this dimension.
    #[error("constant diverges in dimension {0}")]
    DivergentConstant(usize),

    /// An iterative solver stopped before converging. The best iterate is attached.
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    ConvergenceFailure {
        iterations: usize,
        residual: f64,
        best: Option<Box<crate::soliton::SolitonResult>>,
    },

    #[error("numeric overflow at t = {time}")]
    NumericOverflow { time: f64 },

    /// Two independent estimators of the same quantity disagree.
    #[error("estimators disagree: quotient route {quotient}, bisection route {bisection}")]
    Inconsistency { quotient: f64, bisection: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The phase indicator did not bracket a transition.
    #[error("bracket failure: {message}")]
    BracketFailure { message: String, trace: Vec<(f64, bool)> },

    #[error("unreliable estimate: effective sample size {ess:.1}")]
    UnreliableEstimate { ess: f64, estimate: f64 },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
