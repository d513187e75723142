use thiserror::Error;

/// Errors raised by the toolkit.
///
/// Variants are grouped so the CLI can map them onto exit codes: malformed
/// input becomes `Config`, a model that violates an assumption needed by the
/// requested computation becomes `Assumption`.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("state kind mismatch: {0}")]
    KindMismatch(String),

    #[error("index {index} out of range for {len} sites")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("symbol {symbol} outside alphabet of size {alphabet}")]
    SymbolOutOfRange { symbol: usize, alphabet: usize },

    #[error("enumeration cap exceeded: {size} > {cap}")]
    CapExceeded { size: u128, cap: usize },

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("non-normalizable distribution at site {site}")]
    NonNormalizable { site: usize },

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("infeasible transport plan: {0}")]
    Infeasible(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
