use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two PLDs with different grid spacings were combined.
    GridMismatch { left: f64, right: f64 },
    /// No finite epsilon reaches the requested delta.
    Unachievable { delta: f64, infinity_mass: f64 },
    /// A privacy loss outside the open range of the loss function was inverted.
    OutOfRange { loss: f64, lower: f64, upper: f64 },
    InvalidMatrix(String),
    NotPowerOfTwo(usize),
    Divisibility { n: usize, block: usize },
    InvalidParameter(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::GridMismatch { left, right } => {
                write!(f, "grid spacing mismatch: {left} vs {right}")
            }
            Error::Unachievable { delta, infinity_mass } => write!(
                f,
                "delta {delta:e} is below the infinity mass {infinity_mass:e}; no finite epsilon exists"
            ),
            Error::OutOfRange { loss, lower, upper } => {
                write!(f, "privacy loss {loss} outside ({lower}, {upper})")
            }
            Error::InvalidMatrix(msg) => write!(f, "invalid matrix: {msg}"),
            Error::NotPowerOfTwo(n) => write!(f, "{n} is not a power of two"),
            Error::Divisibility { n, block } => {
                write!(f, "block size {block} does not divide {n}")
            }
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
