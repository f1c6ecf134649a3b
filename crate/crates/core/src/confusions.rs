//! Specific pitch errors (semitone, octave, 19 semitones) and repeated or
//! merged notes.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::matching::Matching;
use crate::model::{Note, PianoRoll, MIN_PITCH, NUM_PITCHES};

/// Frames a target row must be silent before a specific error is counted.
pub const DEFAULT_LOOKBACK_FRAMES: usize = 5;
pub const DEFAULT_OVERLAP_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PitchError {
    Semitone,
    Octave,
    /// 19 semitones: the second partial of a note. Only the target note
    /// below the error is consulted.
    Nineteenth,
}

impl PitchError {
    pub const ALL: [PitchError; 3] = [PitchError::Semitone, PitchError::Octave, PitchError::Nineteenth];

    pub fn semitones(self) -> i32 {
        match self {
            PitchError::Semitone => 1,
            PitchError::Octave => 12,
            PitchError::Nineteenth => 19,
        }
    }

    pub fn below_only(self) -> bool {
        self == PitchError::Nineteenth
    }

    /// Whether a target pitch explains an error at `error_pitch`.
    pub fn relates(self, error_pitch: u8, target_pitch: u8) -> bool {
        let diff = i32::from(error_pitch) - i32::from(target_pitch);
        if self.below_only() {
            diff == self.semitones()
        } else {
            diff.abs() == self.semitones()
        }
    }
}

fn fraction(count: usize, total: usize) -> Option<f64> {
    (total > 0).then(|| count as f64 / total as f64)
}

/// Number of output cells that are specific pitch errors, plus the total
/// number of framewise false positives.
pub fn specific_pitch_frame_counts(
    target: &PianoRoll,
    output: &PianoRoll,
    kind: PitchError,
    lookback: usize,
) -> Result<(usize, usize)> {
    target.check_same_shape(output)?;
    let interval = kind.semitones();
    let mut errors = 0;
    let mut fps = 0;
    for row in 0..NUM_PITCHES {
        let pitch = row as i32 + MIN_PITCH as i32;
        let target_row = target.row(row);
        for (t, &active) in output.row(row).iter().enumerate() {
            if !active || target_row[t] {
                continue;
            }
            fps += 1;
            let neighbour =
                target.is_active(pitch - interval, t) || (!kind.below_only() && target.is_active(pitch + interval, t));
            if !neighbour {
                continue;
            }
            let quiet_before = target_row[t.saturating_sub(lookback)..t].iter().all(|&c| !c);
            if quiet_before {
                errors += 1;
            }
        }
    }
    Ok((errors, fps))
}

/// `(errors / frames, errors / framewise fps)`.
pub fn specific_pitch_framewise(
    target: &PianoRoll,
    output: &PianoRoll,
    kind: PitchError,
    lookback: usize,
) -> Result<(f64, Option<f64>)> {
    let (errors, fps) = specific_pitch_frame_counts(target, output, kind, lookback)?;
    Ok((fraction(errors, target.frames()).unwrap_or(0.0), fraction(errors, fps)))
}

fn overlap_ratio(note: &Note, other: &Note) -> f64 {
    note.overlap(other) / note.duration()
}

/// Indices of onset-only false-positive outputs explained by a target note
/// `kind` semitones away overlapping most of the output note.
pub fn specific_pitch_notes(
    targets: &[Note],
    outputs: &[Note],
    matching: &Matching,
    kind: PitchError,
    overlap_threshold: f64,
) -> Vec<usize> {
    matching
        .unmatched_outputs()
        .filter(|&o| {
            let note = &outputs[o];
            targets
                .iter()
                .any(|t| kind.relates(note.pitch(), t.pitch()) && overlap_ratio(note, t) > overlap_threshold)
        })
        .collect()
}

/// `(errors / |outputs|, errors / fps)`.
pub fn specific_pitch_notewise(
    targets: &[Note],
    outputs: &[Note],
    matching: &Matching,
    kind: PitchError,
    overlap_threshold: f64,
) -> (f64, Option<f64>) {
    let count = specific_pitch_notes(targets, outputs, matching, kind, overlap_threshold).len();
    (
        fraction(count, outputs.len()).unwrap_or(0.0),
        fraction(count, matching.false_positives()),
    )
}

/// Notes of `side` that are fragments: unmatched, covering most of a
/// same-pitch note of `other`, which an earlier note of `side` also covers.
fn fragments(side: &[Note], unmatched: &[bool], other: &[Note], threshold: f64) -> Vec<usize> {
    (0..side.len())
        .filter(|&i| unmatched[i])
        .filter(|&i| {
            let note = &side[i];
            other.iter().any(|anchor| {
                anchor.pitch() == note.pitch()
                    && overlap_ratio(note, anchor) > threshold
                    && side.iter().enumerate().any(|(j, prev)| {
                        j != i
                            && prev.pitch() == anchor.pitch()
                            && overlap_ratio(prev, anchor) > threshold
                            && prev.offset() < note.onset()
                    })
            })
        })
        .collect()
}

/// Output indices counted as repeated (fragmented) notes.
pub fn repeated_note_indices(
    targets: &[Note],
    outputs: &[Note],
    matching: &Matching,
    overlap_threshold: f64,
) -> Vec<usize> {
    let unmatched: Vec<bool> = (0..outputs.len()).map(|o| !matching.is_output_matched(o)).collect();
    fragments(outputs, &unmatched, targets, overlap_threshold)
}

/// Target indices counted as merged notes.
pub fn merged_note_indices(
    targets: &[Note],
    outputs: &[Note],
    matching: &Matching,
    overlap_threshold: f64,
) -> Vec<usize> {
    let unmatched: Vec<bool> = (0..targets.len()).map(|t| !matching.is_target_matched(t)).collect();
    fragments(targets, &unmatched, outputs, overlap_threshold)
}

/// `(repeated / fps, repeated / |outputs|)`.
pub fn repeated_notes(
    targets: &[Note],
    outputs: &[Note],
    matching: &Matching,
    overlap_threshold: f64,
) -> (Option<f64>, f64) {
    let count = repeated_note_indices(targets, outputs, matching, overlap_threshold).len();
    (
        fraction(count, matching.false_positives()),
        fraction(count, outputs.len()).unwrap_or(0.0),
    )
}

/// `(merged / fns, merged / |targets|)`.
pub fn merged_notes(
    targets: &[Note],
    outputs: &[Note],
    matching: &Matching,
    overlap_threshold: f64,
) -> (Option<f64>, f64) {
    let count = merged_note_indices(targets, outputs, matching, overlap_threshold).len();
    (
        fraction(count, matching.false_negatives()),
        fraction(count, targets.len()).unwrap_or(0.0),
    )
}
