use std::path::PathBuf;

use thiserror::Error;

use crate::solvers::DivergedRun;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric integrity violated: {0}")]
    NumericIntegrity(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("run diverged at iteration {}: {}", .0.iteration, .0.reason)]
    Diverged(Box<DivergedRun>),

    #[error(transparent)]
    Wav(#[from] WavError),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("report serialization failed: {0}")]
    Report(String),
}

/// Failures specific to reading and writing WAV files.
#[derive(Debug, Error)]
pub enum WavError {
    #[error("malformed WAV header: {0}")]
    MalformedHeader(String),

    #[error("unsupported WAV codec: {0}")]
    UnsupportedCodec(String),

    #[error("sample rate mismatch: file is {found} Hz but the configuration expects {expected} Hz; resample the input first")]
    RateMismatch { expected: u32, found: u32 },

    #[error("WAV i/o failure: {0}")]
    Io(#[from] std::io::Error),
}
