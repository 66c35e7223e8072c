//! Crate-wide error type.

use std::fmt;
use std::io;

/// Broad failure class, used by callers that map errors to exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input: malformed files, violated preconditions, invalid parameters.
    Validation,
    /// A numerical procedure failed to converge or produced no usable result.
    Numerical,
    /// Underlying I/O failure.
    Io,
}

#[derive(Debug)]
pub enum Error {
    /// Input file or parameter violates a documented contract.
    Invalid(String),
    /// File parsing failure with a short description of what was malformed.
    Parse(String),
    /// An iterative numerical method did not converge.
    NonConvergence(String),
    /// The solver window is too small: the fundamental mode touches the edge.
    WindowClipping { edge_ratio: f64 },
    /// Mode pairing across wavelengths failed for the listed mode indices.
    UnmatchedModes(Vec<usize>),
    /// No power survives the loss model; the response is empty.
    NoPropagatingPower,
    Io(io::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Invalid(_) | Error::Parse(_) => ErrorClass::Validation,
            Error::NonConvergence(_)
            | Error::WindowClipping { .. }
            | Error::UnmatchedModes(_)
            | Error::NoPropagatingPower => ErrorClass::Numerical,
            Error::Io(_) => ErrorClass::Io,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Invalid(msg) => write!(f, "invalid input: {msg}"),
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
            Error::NonConvergence(msg) => write!(f, "no convergence: {msg}"),
            Error::WindowClipping { edge_ratio } => write!(
                f,
                "window clipping: fundamental-mode field at the window edge is \
                 {edge_ratio:.2e} of its peak (limit 1e-6); enlarge the window"
            ),
            Error::UnmatchedModes(idx) => {
                write!(f, "unmatched modes (overlap below threshold): {idx:?}")
            }
            Error::NoPropagatingPower => write!(f, "no propagating power after loss"),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(e: io::Error) -> Self {
        Error::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
