use alloc::string::String;
use core::fmt;

/// Every fallible operation in the crate reports one of these.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Shapes or lengths that do not agree with each other.
    Validation(String),
    /// A configuration that violates its own invariants (odd axis width, bad base, ...).
    Config(String),
    /// An argument outside the mathematical domain of the operation.
    Domain(String),
    /// A probe specification that cannot produce valid episodes.
    Spec(String),
    /// Non-finite loss or update during training.
    Training(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Validation(m) => write!(f, "validation error: {m}"),
            Error::Config(m) => write!(f, "configuration error: {m}"),
            Error::Domain(m) => write!(f, "domain error: {m}"),
            Error::Spec(m) => write!(f, "probe spec error: {m}"),
            Error::Training(m) => write!(f, "training error: {m}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
