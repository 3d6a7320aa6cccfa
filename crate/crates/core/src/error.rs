use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, PprError>;

#[derive(Debug, Error)]
pub enum PprError {
    /// A caller-supplied parameter is outside its domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// The input is well-formed but violates a structural requirement.
    #[error("validation error: {0}")]
    Validation(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

impl PprError {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        PprError::InvalidArgument(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            PprError::InvalidArgument(_) => 2,
            PprError::Validation(_) | PprError::Parse { .. } => 3,
            PprError::Io(_) => 1,
        }
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(PprError::arg(format!("alpha must be in (0, 1), got {alpha}")));
    }
    Ok(())
}
