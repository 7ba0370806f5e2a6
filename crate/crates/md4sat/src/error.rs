use std::io;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] md4sat_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("malformed DIMACS: {0}")]
    Dimacs(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("solver adapter: {0}")]
    Adapter(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
