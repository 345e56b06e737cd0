//! Command-line front end and HTTP service for the invizo OCR engine.

pub mod commands;
pub mod service;

use invizo::Error;

/// A command failure, split by whose fault it is.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad arguments or unreadable / malformed input files.
    #[error("{0}")]
    Input(String),
    /// Valid input that could not be processed.
    #[error("{0}")]
    Processing(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Processing(_) => 2,
        }
    }

    /// Input error mentioning the offending path.
    pub fn input_at(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        CliError::Input(format!("{}: {e}", path.display()))
    }

    /// Classifies an engine error: decoding, parsing and I/O problems are
    /// input errors, everything else is a processing failure.
    pub fn from_engine(path: &std::path::Path, e: Error) -> Self {
        match e {
            Error::Io(_)
            | Error::Json(_)
            | Error::ImageDecode(_)
            | Error::InvalidImage(_)
            | Error::Schema(_)
            | Error::Validation(_)
            | Error::Checkpoint(_)
            | Error::Font(_) => CliError::input_at(path, e),
            other => CliError::Processing(format!("{}: {other}", path.display())),
        }
    }
}
