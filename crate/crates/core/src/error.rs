use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sigma(y) is singular; use the numeric conjugate instead")]
    SingularSigma,

    #[error("closed-form conjugate unavailable for base noise `{0}`")]
    NoClosedForm(&'static str),

    #[error("state became non-finite at step {step}")]
    Blowup { step: usize },

    #[error("time {0} outside [0, 1]")]
    TimeOutOfRange(f64),

    #[error("target level is not rare: mean projection {mean} >= level {level}")]
    NotRare { mean: f64, level: f64 },

    #[error("tilt diverged: level {level} unreachable below parameter cap {cap}")]
    TiltDivergent { level: f64, cap: f64 },

    #[error("conjugate solver hit the iteration cap in segment {segment}")]
    ConjugateMaxIterations { segment: usize },

    #[error("no finite-action path: {0}")]
    Infeasible(String),

    #[error("tilted sampling requires an affine model with Gaussian base noise")]
    TiltUnsupported,

    #[error("trajectory i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
