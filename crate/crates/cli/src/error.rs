use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] cotag::Error),
    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn file(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::File {
            path: path.into(),
            source,
        }
    }

    /// 1 usage, 2 data, 3 internal.
    pub fn exit_code(&self) -> u8 {
        fn core(e: &cotag::Error) -> u8 {
            use cotag::Error as E;
            match e {
                E::InvalidArgument(_) | E::Unreachable(_) => 1,
                E::Iteration { source, .. } => core(source),
                _ => 2,
            }
        }
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) => core(e),
            CliError::File { .. } | CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
