use thiserror::Error;

use crate::render::RenderError;
use crate::surface_spec::SpecError;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const ERROR: u8 = 1;
    pub const DEGENERATE: u8 = 2;
    pub const USAGE: u8 = 64;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("surface spec: {0}")]
    Spec(SpecError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("report schema `{found}` is not `{expected}`")]
    Schema { found: String, expected: &'static str },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl From<SpecError> for CliError {
    fn from(e: SpecError) -> Self {
        CliError::Spec(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Spec(SpecError::Unsupported(_)) => exit::ERROR,
            CliError::Spec(_) => exit::USAGE,
            _ => exit::ERROR,
        }
    }
}
