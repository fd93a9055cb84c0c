use thiserror::Error;

/// Errors produced by the solvers and the experiment runner.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no sign change on [{a}, {b}]: f(a) = {fa}, f(b) = {fb}")]
    Bracket { a: f64, b: f64, fa: f64, fb: f64 },

    #[error("no convergence after {iterations} iterations (last iterate {last}, residual {residual:e})")]
    Convergence {
        iterations: usize,
        last: String,
        residual: f64,
    },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("instantaneous diffusion coefficient must be positive, got {0}")]
    Ellipticity(f64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Process exit code used by the command line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Bracket { .. } | Error::Convergence { .. } => 3,
            Error::Config(_)
            | Error::InvalidArgument(_)
            | Error::Domain(_)
            | Error::Ellipticity(_)
            | Error::Unsupported(_)
            | Error::Io(_) => 2,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
