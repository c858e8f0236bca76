use std::io;

use thiserror::Error;

/// Errors raised by the corpus, model and bootstrap layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: {message}")]
    Integrity { line: usize, message: String },

    #[error("training error in segment {segment}, sentence {sentence}, token {token}: {message}")]
    Training {
        segment: usize,
        sentence: usize,
        token: usize,
        message: String,
    },

    #[error("model not trained: {0}")]
    Untrained(&'static str),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unreachable target: {0}")]
    Unreachable(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("bootstrap iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn integrity(line: usize, message: impl Into<String>) -> Self {
        Error::Integrity {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
