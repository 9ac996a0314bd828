//! Error type shared across the crate.

use alloc::string::String;
use core::fmt;

/// Errors produced by matrix operations, estimators and calibration.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Shapes or index ranges do not line up.
    Dimension(String),
    /// An input value is out of its admissible range (NaN, wrong sign, ...).
    InvalidInput(String),
    /// A configuration parameter is out of range.
    InvalidParameter(String),
    /// Not enough data to carry out the operation.
    InsufficientData(String),
    /// A per-entry uncertainty scale is zero or negative.
    InvalidScale(String),
    /// The solver objective blew up; the payload names the iteration.
    Divergence { iteration: usize },
    /// Unknown simulation setting id.
    UnknownSetting(u32),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension(m) => write!(f, "dimension error: {m}"),
            Error::InvalidInput(m) => write!(f, "invalid input: {m}"),
            Error::InvalidParameter(m) => write!(f, "invalid parameter: {m}"),
            Error::InsufficientData(m) => write!(f, "insufficient data: {m}"),
            Error::InvalidScale(m) => write!(f, "invalid scale: {m}"),
            Error::Divergence { iteration } => {
                write!(f, "solver diverged at iteration {iteration}")
            }
            Error::UnknownSetting(id) => write!(f, "unknown setting: {id}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
