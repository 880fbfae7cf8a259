use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no root: {0}")]
    NoRoot(String),
    #[error("critical or subcritical point: {0}")]
    Criticality(String),
    #[error("degenerate minimum: {0}")]
    Degenerate(String),
    #[error("rejection sampling failed after {0} tries")]
    RejectionFailure(usize),
    #[error("search failure: {0}")]
    Search(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
