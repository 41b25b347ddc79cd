use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration for `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("step-size error: {0}")]
    StepSize(String),

    #[error("logic error: {0}")]
    Logic(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("dimension cap exceeded: {sites} sites (maximum {cap})")]
    DimensionCap { sites: usize, cap: usize },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Process exit status: 1 for bad input, 2 for a violated numerical invariant.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invariant(_) | Error::StepSize(_) | Error::NumericalDegeneracy(_) | Error::Logic(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
