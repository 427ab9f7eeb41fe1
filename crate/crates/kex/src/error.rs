use std::path::{Path, PathBuf};

use kex_core::{LearnError, SimError};

#[derive(Debug, thiserror::Error)]
pub enum KexError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config: {0}")]
    Config(String),
    #[error("{what}, line {line}: {message}")]
    Parse { what: &'static str, line: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Learn(#[from] LearnError),
}

impl KexError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        KexError::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn parse(what: &'static str, line: usize, message: impl Into<String>) -> Self {
        KexError::Parse { what, line, message: message.into() }
    }
}
