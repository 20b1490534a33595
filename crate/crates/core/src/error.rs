use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid size: {0}")]
    Size(String),
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("string is not closed ({0} plaquettes with odd incidence)")]
    OpenString(usize),
    #[error("region out of bounds: {0}")]
    OutOfBounds(String),
    #[error("enumeration needs 2^{log2_needed:.1} states but the budget is 2^{log2_budget:.1}; {hint}")]
    Budget {
        log2_needed: f64,
        log2_budget: f64,
        hint: String,
    },
    #[error("resource limit: {0}")]
    Resource(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
