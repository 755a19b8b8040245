use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    /// Malformed or invalid configuration file.
    #[error("{}: {message}", path.display())]
    Config { path: PathBuf, message: String },

    /// Malformed data file.
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] leonet_core::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code: 2 for configuration errors, 3 for numerical
    /// failures, 1 for anything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config { .. } => 2,
            Error::Core(e) if e.is_numerical() => 3,
            Error::Core(e) if is_config(e) => 2,
            _ => 1,
        }
    }
}

fn is_config(e: &leonet_core::Error) -> bool {
    match e {
        leonet_core::Error::InvalidConfig(_) => true,
        leonet_core::Error::Stage { source, .. } => is_config(source),
        _ => false,
    }
}
