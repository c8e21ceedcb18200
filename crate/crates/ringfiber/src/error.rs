use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("result not representable: {0}")]
    Overflow(String),
    #[error("mismatched inputs: {0}")]
    Mismatch(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("no guided mode: {0}")]
    NoMode(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
