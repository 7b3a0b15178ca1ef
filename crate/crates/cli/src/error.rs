use std::fmt;

use orthokey::classical::ClassicalError;
use orthokey::gv::GvError;
use orthokey::n09::bomb::BombError;
use orthokey::n09::N09Error;
use orthokey::session::{OtpError, SessionError};

/// Failure categories, each with its own exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Config,
    InsufficientData,
    Io,
}

impl Category {
    pub fn name(self) -> &'static str {
        match self {
            Category::Config => "config",
            Category::InsufficientData => "insufficient_data",
            Category::Io => "io",
        }
    }

    pub fn exit_code(self) -> u8 {
        match self {
            Category::Config => 2,
            Category::InsufficientData => 3,
            Category::Io => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub category: Category,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            category: Category::Config,
            message: message.into(),
        }
    }

    pub fn no_data(message: impl Into<String>) -> Self {
        Self {
            category: Category::InsufficientData,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            category: Category::Io,
            message: message.into(),
        }
    }

    /// One JSON object on a single line, for stderr.
    pub fn to_json_line(&self) -> String {
        serde_json::json!({ "error": self.category.name(), "message": self.message }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.category.name(), self.message)
    }
}

impl std::error::Error for CliError {}

pub type Result<T> = std::result::Result<T, CliError>;

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::io(e.to_string())
    }
}

impl From<GvError> for CliError {
    fn from(e: GvError) -> Self {
        match e {
            GvError::NoData => Self::no_data(e.to_string()),
            _ => Self::config(e.to_string()),
        }
    }
}

impl From<N09Error> for CliError {
    fn from(e: N09Error) -> Self {
        match e {
            N09Error::NoData => Self::no_data(e.to_string()),
            _ => Self::config(e.to_string()),
        }
    }
}

impl From<SessionError> for CliError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::EmptyKey(_) => Self::no_data(e.to_string()),
            _ => Self::config(e.to_string()),
        }
    }
}

impl From<BombError> for CliError {
    fn from(e: BombError) -> Self {
        Self::config(e.to_string())
    }
}

impl From<ClassicalError> for CliError {
    fn from(e: ClassicalError) -> Self {
        match e {
            ClassicalError::TextTooShort { .. } | ClassicalError::Inconclusive => Self::no_data(e.to_string()),
            _ => Self::config(e.to_string()),
        }
    }
}

impl From<OtpError> for CliError {
    fn from(e: OtpError) -> Self {
        match e {
            OtpError::KeyTooShort { .. } => Self::no_data(e.to_string()),
            OtpError::KeyReuse { .. } => Self::config(e.to_string()),
        }
    }
}
