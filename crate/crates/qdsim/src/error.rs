use std::io;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] qdsim_core::Error),
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },
    #[error("I/O error at byte {offset}: {source}")]
    Io { offset: u64, source: io::Error },
    #[error("{path}: {source}")]
    File { path: String, source: io::Error },
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("usage: {0}")]
    Usage(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn format(offset: u64, message: impl Into<String>) -> Self {
        Error::Format { offset, message: message.into() }
    }

    pub(crate) fn file(path: &std::path::Path, source: io::Error) -> Self {
        Error::File { path: path.display().to_string(), source }
    }
}
