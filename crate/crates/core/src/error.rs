use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid note: {0}")]
    InvalidNote(String),

    #[error("pitch {0} outside the piano range 21..=108")]
    PitchOutOfRange(i64),

    #[error("target note {index} has no velocity")]
    MissingVelocity { index: usize },

    #[error("pedal events are not sorted by time")]
    UnsortedPedal,

    #[error("piano roll dimensions differ: {left} vs {right} frames")]
    DimensionMismatch { left: usize, right: usize },

    #[error("malformed MIDI file at byte {offset}: {message}")]
    Smf { offset: usize, message: String },

    #[error("line {line}: {message}")]
    Text { line: usize, message: String },

    #[error("beat grid line {line}: {message}")]
    Grid { line: usize, message: String },

    #[error("chord table line {line}: {message}")]
    ChordTable { line: usize, message: String },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("quantisation requires a beat grid or tempo")]
    MissingGrid,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },

    #[error("manifest: {0}")]
    Manifest(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, err: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }

    /// True for errors raised while decoding an input file.
    pub fn is_parse_error(&self) -> bool {
        matches!(
            self,
            Error::Smf { .. }
                | Error::Text { .. }
                | Error::Grid { .. }
                | Error::ChordTable { .. }
                | Error::Config { .. }
                | Error::PitchOutOfRange(_)
                | Error::InvalidNote(_)
                | Error::MissingVelocity { .. }
        )
    }
}
