use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),

    #[error("output directory {0} is not empty; pass --force to overwrite")]
    OutDirExists(String),

    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },

    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Engine(#[from] sabc::SabcError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::OutDirExists(_) | CliError::Read { .. } => 2,
            CliError::Io(_) | CliError::Engine(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) | CliError::Read { .. } => "config",
            CliError::OutDirExists(_) => "out_dir_exists",
            CliError::Io(_) => "io",
            CliError::Engine(_) => "runtime",
        }
    }

    pub fn details(&self) -> Vec<String> {
        match self {
            CliError::Config(list) => list.clone(),
            other => vec![other.to_string()],
        }
    }
}

/// Machine-readable failure record (`error.json`).
#[derive(Serialize)]
pub struct ErrorRecord<'a> {
    pub kind: &'a str,
    pub exit_code: i32,
    pub message: String,
    pub details: Vec<String>,
}

impl<'a> From<&'a CliError> for ErrorRecord<'a> {
    fn from(e: &'a CliError) -> Self {
        Self {
            kind: e.kind(),
            exit_code: e.exit_code(),
            message: e.to_string(),
            details: e.details(),
        }
    }
}
