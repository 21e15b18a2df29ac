use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure classes, used by the command line to pick an exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Integrity,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("{op}: empty sequence")]
    EmptySequence { op: &'static str },

    #[error("masked softmax: every position is masked")]
    DegenerateMask,

    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("{op}: non-finite value")]
    NonFinite { op: &'static str },

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("integrity check failed: {0}")]
    Integrity(String),

    #[error("non-finite gradient for parameter `{param}`")]
    NanGradient { param: String },

    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Divergence { epoch: usize, loss: f64 },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Self {
        Error::Shape { op, left, right }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::Contract(_) | Error::Label { .. } => ErrorClass::Config,
            Error::Integrity(_) => ErrorClass::Integrity,
            Error::NonFinite { .. } | Error::NanGradient { .. } | Error::Divergence { .. } => {
                ErrorClass::Numeric
            }
            Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => {
                ErrorClass::Config
            }
            Error::Shape { .. }
            | Error::EmptySequence { .. }
            | Error::DegenerateMask
            | Error::Parse { .. }
            | Error::Format(_)
            | Error::Input(_)
            | Error::Io { .. }
            | Error::Json(_) => ErrorClass::Data,
        }
    }
}
