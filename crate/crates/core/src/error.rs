use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("size guard exceeded: {what} = {value} > {limit}")]
    TooLarge {
        what: &'static str,
        value: usize,
        limit: usize,
    },
    #[error("coefficient is not symmetric positive definite on cell {0}")]
    NotSpd(usize),
    #[error("matrix is singular")]
    Singular,
    #[error("incompatible projections: {0}")]
    Incompatible(String),
    #[error("register error: {0}")]
    Register(String),
    #[error("subnormalization bound unset for {0}")]
    UnsetSubnorm(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
