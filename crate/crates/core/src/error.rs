use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("transfer function evaluated at a pole (f = {f_hz} Hz)")]
    PoleOnAxis { f_hz: f64 },

    #[error("degenerate feedback loop: 1 + G*H is identically zero")]
    DegenerateLoop,

    #[error("degenerate parallel combination: a + b is identically zero")]
    DegenerateParallel,

    #[error("polynomial degree {degree} exceeds the cap of {cap}")]
    DegreeCapExceeded { degree: usize, cap: usize },

    #[error("root finder did not converge within {iterations} iterations")]
    ConvergenceFailure { iterations: usize },

    #[error("frequency grid too coarse: unwrapped phase step of {step_deg:.1} deg near {f_hz:.4e} Hz after refinement")]
    GridTooCoarse { f_hz: f64, step_deg: f64 },

    #[error("corner {f0_hz} Hz is infeasible: it must exceed {boundary_hz} Hz")]
    InfeasibleCorner { f0_hz: f64, boundary_hz: f64 },

    #[error("no gain crossover in the swept band")]
    NoCrossover,

    #[error("no feasible compensation design among the candidates")]
    NoFeasibleDesign,

    #[error("transfer function is improper (numerator degree {num} > denominator degree {den})")]
    ImproperTransferFunction { num: usize, den: usize },

    #[error("system is unstable; refusing to simulate (poles: {poles:?})")]
    UnstableSystem { poles: Vec<Complex64> },

    #[error("loop is singular at {f_hz} Hz: 1 + G*H is numerically zero")]
    SingularLoop { f_hz: f64 },

    #[error("frequencies must be strictly ascending (row {line})")]
    NonMonotonicFrequency { line: u64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("invalid value for `{key}`: {message}")]
    Validation { key: String, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn validation(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            key: key.into(),
            message: message.into(),
        }
    }
}
