use std::process::ExitCode;

use roadmap_core::Error as CoreError;

/// Failure category; decides the process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Config,
    Data,
    Estimation,
}

impl Category {
    pub fn exit_code(self) -> u8 {
        match self {
            Category::Config => 1,
            Category::Data => 2,
            Category::Estimation => 3,
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub category: Category,
    pub message: String,
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError { category: Category::Config, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError { category: Category::Data, message: message.into() }
    }

    pub fn estimation(message: impl Into<String>) -> Self {
        CliError { category: Category::Estimation, message: message.into() }
    }

    /// Prefix the message with the grid cell it came from.
    pub fn in_cell(mut self, cell: &str) -> Self {
        self.message = format!("[{cell}] {}", self.message);
        self
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.category.exit_code())
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let category = match e {
            CoreError::Config(_) | CoreError::EmptyLibrary => Category::Config,
            ref e if e.is_data_error() => Category::Data,
            _ => Category::Estimation,
        };
        CliError { category, message: e.to_string() }
    }
}
