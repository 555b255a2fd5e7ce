use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the toolkit can report.
///
/// Variants are grouped by the CLI exit status they map to: configuration
/// problems (1), bad input data (2) and numerical divergence (3).
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid word {word:?}: {reason}")]
    InvalidWord { word: String, reason: &'static str },

    #[error("empty word list")]
    EmptyWordList,

    #[error("word {word:?} has cue {cue:?} that is not in the cue inventory")]
    UnknownCue { word: String, cue: String },

    #[error("vocabulary mismatch: no embedding for {}", .0.join(", "))]
    MissingEmbeddings(Vec<String>),

    #[error("no frequency for {}", .0.join(", "))]
    MissingFrequencies(Vec<String>),

    #[error("inconsistent embedding dimension for {word:?}: expected {expected}, found {found}")]
    InconsistentDimension {
        word: String,
        expected: usize,
        found: usize,
    },

    #[error("semantic vector of {0:?} is constant")]
    ConstantRow(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("duplicate row for {0:?}")]
    Duplicate(String),

    #[error("missing artifact {path}: run `lexilearn {step}` first")]
    MissingArtifact { path: PathBuf, step: String },

    #[error("malformed checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error("divergence in {stage} at step {step}: {detail}")]
    Divergence {
        stage: &'static str,
        step: usize,
        detail: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Process exit status for this error: 1 usage/config, 2 data, 3 divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => 1,
            Error::Divergence { .. } => 3,
            _ => 2,
        }
    }
}
