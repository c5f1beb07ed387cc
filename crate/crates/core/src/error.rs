use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the function it was passed to.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Lyapunov construction refused because an eigenvalue is defective.
    #[error("defective eigenvalue {re:+.6e}{im:+.6e}i: construction refused")]
    Defective { re: f64, im: f64 },

    #[error("eigensolver did not converge ({0})")]
    EigenSolver(String),

    /// A certificate could not be produced or failed verification.
    #[error("certification failed at k = {k}: margin {margin:.3e}")]
    Certification { k: i64, margin: f64, minors: Vec<f64> },

    /// Density or pressure lost positivity during a nonlinear run.
    #[error("simulation blowup at t = {time}: {reason}")]
    Blowup { time: f64, reason: String },

    /// The top quarter of the Fourier or Hermite spectrum carries too much norm.
    #[error("truncation too coarse: tail fraction {fraction:.3e} above {threshold:.3e} at t = {time}")]
    Truncation { time: f64, fraction: f64, threshold: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
