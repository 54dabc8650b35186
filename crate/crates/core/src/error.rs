use alloc::string::String;
use core::fmt;

/// Errors raised by the simulator core.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// A dense array or tensor header does not match its declared shape.
    Format(String),
    /// A stored tensor or accumulation state is internally inconsistent.
    Integrity(String),
    /// Operand geometries do not line up.
    Shape(String),
    /// A configuration value is out of range.
    Config(String),
    /// A layer list does not chain.
    Model(String),
    /// The simulator broke one of its own invariants.
    Invariant(String),
}

impl Error {
    /// True for failures that indicate a simulator bug rather than bad input.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Invariant(_))
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Format(m) => write!(f, "format error: {m}"),
            Error::Integrity(m) => write!(f, "integrity error: {m}"),
            Error::Shape(m) => write!(f, "shape error: {m}"),
            Error::Config(m) => write!(f, "config error: {m}"),
            Error::Model(m) => write!(f, "model error: {m}"),
            Error::Invariant(m) => write!(f, "invariant violation: {m}"),
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
