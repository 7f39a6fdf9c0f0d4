use thiserror::Error;

/// Broad failure category, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad parameters or inconsistent configuration.
    Config,
    /// Malformed or incompatible input data.
    Data,
    /// A numerical routine could not produce a result.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("alphabet mismatch: {left} vs {right}")]
    AlphabetMismatch { left: usize, right: usize },

    #[error("letter {letter} outside alphabet 1..={dim}")]
    InvalidLetter { letter: usize, dim: usize },

    #[error("required tensor level {required} exceeds the configured cap {cap}")]
    LevelCapExceeded { required: usize, cap: usize },

    #[error("tensor level {available} is too low, level {required} is required")]
    InsufficientLevel { required: usize, available: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infeasible constraints: {0}")]
    Infeasible(String),

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter(_) | Error::LevelCapExceeded { .. } | Error::Infeasible(_) => {
                ErrorKind::Config
            }
            Error::AlphabetMismatch { .. }
            | Error::InvalidLetter { .. }
            | Error::InsufficientLevel { .. }
            | Error::ShapeMismatch(_)
            | Error::InvalidPath(_)
            | Error::EmptyInput(_)
            | Error::Degenerate(_) => ErrorKind::Data,
            Error::NotPsd { .. } | Error::Numerical(_) => ErrorKind::Numerical,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
