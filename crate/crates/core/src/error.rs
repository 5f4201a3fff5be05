use thiserror::Error;

/// Errors raised by chain construction, mode analysis and the exact oracle.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("degenerate resonance: modes {first} and {second} are {gap:e} apart in detuning")]
    DegenerateResonance { first: usize, second: usize, gap: f64 },

    #[error("dark mode {mode}: end amplitudes (left {left:e}, right {right:e}) vanish")]
    DarkMode { mode: usize, left: f64, right: f64 },

    #[error("resonance collision: mode {mode} is {gap:e} from the resonant energy")]
    ResonanceCollision { mode: usize, gap: f64 },

    #[error("system of {sites} sites exceeds the oracle cap of {cap}")]
    SizeCapExceeded { sites: usize, cap: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::NumericFailure(msg.into())
    }

    /// True for failures caused by floating-point breakdown rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NumericFailure(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
