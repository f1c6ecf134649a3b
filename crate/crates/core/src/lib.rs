//! Musically-informed evaluation metrics for automatic music transcription.
//!
//! The crate compares a target note list (the ground truth, with velocities
//! and optional sustain-pedal data) against a transcription output and
//! produces a fixed-schema [`FeatureVector`] covering benchmark
//! precision/recall, voice-restricted mistakes, loudness and key salience of
//! errors, specific pitch confusions, rhythm regularity and consonance.
//!
//! ```
//! use amt_eval::{evaluate_pair, ingest, EvalConfig, Role};
//!
//! let target = ingest::parse_notes_text("0.0 1.0 60 80\n1.0 2.0 64 70", Role::Target).unwrap();
//! let output = ingest::parse_notes_text("0.01 0.9 60\n1.02 2.0 64", Role::Output).unwrap();
//! let features = evaluate_pair(&target, &output, &EvalConfig::default(), None).unwrap();
//! assert_eq!(features.get("onset_f_measure"), Some(1.0));
//! ```

pub mod benchmark;
pub mod config;
pub mod confusions;
pub mod consonance;
pub mod error;
pub mod evaluate;
pub mod features;
pub mod harness;
pub mod ingest;
pub mod matching;
pub mod model;
pub mod rhythm;
pub mod salience;
pub mod stats;
pub mod synth;
pub mod voice;

pub use config::EvalConfig;
pub use error::{Error, Result};
pub use evaluate::{evaluate_batch, evaluate_pair, BatchRow, PreparedPair};
pub use features::{Direction, FeatureVector};
pub use model::{Note, NoteList, PedalEvent, PedalMode, PianoRoll, Role};
