use std::io;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("statistical failure: {0}")]
    Statistical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Statistical(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    /// Errors raised by the library while running a validated config are
    /// caused by the parameters (budgets, grids), so they count as config
    /// errors.
    pub fn from_lib(e: impl std::fmt::Display) -> Self {
        CliError::Config(e.to_string())
    }
}
