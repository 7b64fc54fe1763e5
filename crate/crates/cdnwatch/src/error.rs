use std::io;
use std::path::PathBuf;

use crate::flowlog::{FormatError, LineError};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Line(#[from] LineError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Core(#[from] cdnwatch_core::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit status: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use cdnwatch_core::Error as C;
        match self {
            Error::Config(_) => 2,
            Error::Core(C::InvalidConfig(_) | C::InvalidParameter(_) | C::InvalidPercentiles(_)) => 2,
            _ => 1,
        }
    }
}

impl From<io::Error> for Error {
    fn from(source: io::Error) -> Self {
        Error::Io { path: PathBuf::new(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
