use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error classes, used by the command line for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorClass {
    Io,
    Schema,
    Data,
    Config,
    Backend,
    Container,
    Integrity,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Io => 2,
            ErrorClass::Schema => 3,
            ErrorClass::Data => 4,
            ErrorClass::Config => 5,
            ErrorClass::Backend => 6,
            ErrorClass::Container => 7,
            ErrorClass::Integrity => 8,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("data error at primitive {index}: {msg}")]
    Data { index: usize, msg: String },

    #[error("value {value} out of range (limit {limit})")]
    Range { value: u64, limit: u64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("insufficient data: need at least {need} rows, got {got}")]
    InsufficientData { need: usize, got: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("corrupt map data: {0}")]
    Corruption(String),

    #[error("backend error: {msg}")]
    Backend { msg: String, diagnostics: String },

    #[error("container error: {0}")]
    Container(String),

    #[error("integrity error: {0}")]
    Integrity(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io(_) => ErrorClass::Io,
            Error::Schema(_) => ErrorClass::Schema,
            Error::Data { .. } | Error::Range { .. } | Error::Shape(_) | Error::InsufficientData { .. } => {
                ErrorClass::Data
            }
            Error::Config(_) => ErrorClass::Config,
            Error::Backend { .. } => ErrorClass::Backend,
            Error::Parse(_) | Error::Format(_) | Error::Corruption(_) | Error::Container(_) => {
                ErrorClass::Container
            }
            Error::Integrity(_) => ErrorClass::Integrity,
        }
    }
}
