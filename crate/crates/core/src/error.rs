use std::path::PathBuf;

use crate::domain::DomainError;
use crate::flow::ParseError;

/// Errors raised while loading an assistant.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n"))]
    Parse(Vec<ParseError>),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("{0}")]
    Config(String),
    #[error("{}", .0.join("\n"))]
    Actions(Vec<String>),
    #[error("{0}")]
    Test(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
