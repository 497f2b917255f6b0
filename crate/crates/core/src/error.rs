use thiserror::Error;

/// Errors raised anywhere in the laboratory.
///
/// Variants are grouped so that the CLI can map them onto its exit codes:
/// argument/domain problems are validation errors, quadrature and
/// integration breakdowns are numerical failures.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("gamma function pole at {0}")]
    GammaPole(f64),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("quadrature did not converge: {0}")]
    NonConvergence(String),

    #[error("state invariant violated: {0}")]
    InvalidState(String),

    #[error("blowup approached beyond resolution at t = {time}: {reason}")]
    StepUnderflow { time: f64, reason: String },

    #[error("configuration error in `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_)
            | Error::Domain(_)
            | Error::GammaPole(_)
            | Error::LengthMismatch { .. }
            | Error::Config { .. }
            | Error::Io(_) => 1,
            Error::NonConvergence(_) | Error::StepUnderflow { .. } => 2,
            Error::InvalidState(_) => 3,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
