//! Mistakes restricted to the highest and lowest voice.
//!
//! The highest (lowest) sounding target pitch is used as a proxy for the
//! melody (bass line). Both framewise and notewise variants are computed on
//! the target *without* sustain pedal.

use serde::{Deserialize, Serialize};

use crate::benchmark::PrfCounts;
use crate::error::Result;
use crate::matching::Matching;
use crate::model::{Note, PianoRoll, MIN_PITCH, NUM_PITCHES};

/// Minimum time a note must dominate to belong to a voice, in seconds.
pub const DEFAULT_MIN_DOMINANCE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Voice {
    Highest,
    Lowest,
}

impl Voice {
    /// Whether `pitch` lies strictly beyond `reference` on this voice's side.
    fn beyond(self, pitch: u8, reference: u8) -> bool {
        match self {
            Voice::Highest => pitch > reference,
            Voice::Lowest => pitch < reference,
        }
    }
}

/// Per-frame MIDI pitch of the voice, `-1` on silent frames.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoiceSeries {
    pub values: Vec<i32>,
}

pub fn frame_voice(target: &PianoRoll, which: Voice) -> VoiceSeries {
    let values = (0..target.frames())
        .map(|t| {
            let mut rows = 0..NUM_PITCHES;
            let found = match which {
                Voice::Highest => rows.rev().find(|&r| target.get(r, t)),
                Voice::Lowest => rows.find(|&r| target.get(r, t)),
            };
            found.map_or(-1, |r| r as i32 + MIN_PITCH as i32)
        })
        .collect();
    VoiceSeries { values }
}

/// Framewise voice counts. A frame where the target is silent turns every
/// active output cell into a false positive.
pub fn voice_framewise_counts(target: &PianoRoll, output: &PianoRoll, which: Voice) -> Result<PrfCounts> {
    target.check_same_shape(output)?;
    let series = frame_voice(target, which);
    let mut counts = PrfCounts::default();
    for (t, &v) in series.values.iter().enumerate() {
        if v >= 0 {
            if output.is_active(v, t) {
                counts.tp += 1;
            } else {
                counts.fn_ += 1;
            }
        }
        for row in 0..NUM_PITCHES {
            if !output.get(row, t) {
                continue;
            }
            let pitch = row as u8 + MIN_PITCH;
            if v < 0 || which.beyond(pitch, v as u8) {
                counts.fp += 1;
            }
        }
    }
    Ok(counts)
}

/// Length of the longest stretch of `[onset, offset]` during which no
/// blocking note sounds. Blocking intervals are closed.
fn longest_free_run<'a>(onset: f64, offset: f64, blockers: impl Iterator<Item = &'a Note>) -> f64 {
    let mut blocked: Vec<(f64, f64)> = blockers
        .filter(|b| b.onset() <= offset && b.offset() >= onset)
        .map(|b| (b.onset().max(onset), b.offset().min(offset)))
        .collect();
    blocked.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cursor = onset;
    let mut longest: f64 = 0.0;
    for (start, end) in blocked {
        longest = longest.max(start - cursor);
        cursor = cursor.max(end);
    }
    longest.max(offset - cursor)
}

/// True when `note` is the voice note (strictly above every other sounding
/// note for highest, strictly below for lowest) for more than `min_duration`
/// seconds. `skip` excludes the note's own index from `others`.
fn dominates(note: &Note, others: &[Note], skip: Option<usize>, which: Voice, min_duration: f64) -> bool {
    let blockers = others
        .iter()
        .enumerate()
        .filter(|&(i, _)| Some(i) != skip)
        .map(|(_, o)| o)
        .filter(|o| !which.beyond(note.pitch(), o.pitch()));
    longest_free_run(note.onset(), note.offset(), blockers) > min_duration
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoiceNotes {
    /// Target indices belonging to the voice, ascending.
    pub members: Vec<usize>,
    pub min_duration: f64,
}

impl VoiceNotes {
    pub fn contains(&self, index: usize) -> bool {
        self.members.binary_search(&index).is_ok()
    }
}

pub fn extract_voice_notes(targets: &[Note], which: Voice, min_duration: f64) -> VoiceNotes {
    let members = targets
        .iter()
        .enumerate()
        .filter(|&(i, n)| dominates(n, targets, Some(i), which, min_duration))
        .map(|(i, _)| i)
        .collect();
    VoiceNotes { members, min_duration }
}

/// Notewise voice counts given an onset-only matching of the same lists.
pub fn voice_notewise_counts(
    targets: &[Note],
    outputs: &[Note],
    matching: &Matching,
    which: Voice,
    min_duration: f64,
) -> PrfCounts {
    let voice = extract_voice_notes(targets, which, min_duration);
    let tp = voice.members.iter().filter(|&&i| matching.is_target_matched(i)).count();
    let fn_ = voice.members.len() - tp;
    let fp = matching
        .unmatched_outputs()
        .filter(|&o| dominates(&outputs[o], targets, None, which, min_duration))
        .count();
    PrfCounts { tp, fp, fn_ }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::{max_match, Criterion};
    use crate::model::{NoteList, PedalMode, Role};

    fn n(s: f64, e: f64, p: i64) -> Note {
        Note::new(s, e, p, Some(64)).unwrap()
    }

    fn roll(notes: &[Note], frames: usize) -> PianoRoll {
        let list = NoteList::new(notes.to_vec(), vec![], Role::Target).unwrap();
        PianoRoll::from_notes_with_frames(&list, PedalMode::WithoutPedal, frames)
    }

    #[test]
    fn frame_voice_chord_and_silence() {
        let r = roll(&[n(0.0, 0.01, 60), n(0.0, 0.01, 64), n(0.0, 0.01, 67)], 2);
        assert_eq!(frame_voice(&r, Voice::Highest).values, vec![67, -1]);
        assert_eq!(frame_voice(&r, Voice::Lowest).values, vec![60, -1]);
    }

    #[test]
    fn framewise_fp_above_highest() {
        let t = roll(&[n(0.0, 0.01, 60), n(0.0, 0.01, 67)], 1);
        let o = roll(&[n(0.0, 0.01, 67), n(0.0, 0.01, 69), n(0.0, 0.01, 62)], 1);
        assert_eq!(
            voice_framewise_counts(&t, &o, Voice::Highest).unwrap(),
            PrfCounts::new(1, 1, 0)
        );
        assert_eq!(
            voice_framewise_counts(&t, &o, Voice::Lowest).unwrap(),
            PrfCounts::new(0, 0, 1)
        );
        assert_eq!(
            voice_framewise_counts(&t, &t, Voice::Highest).unwrap().prf().f_measure,
            1.0
        );
    }

    #[test]
    fn framewise_silence_counts_every_output_cell() {
        let t = roll(&[], 2);
        let o = roll(&[n(0.0, 0.02, 60), n(0.0, 0.01, 72)], 2);
        for which in [Voice::Highest, Voice::Lowest] {
            assert_eq!(voice_framewise_counts(&t, &o, which).unwrap(), PrfCounts::new(0, 3, 0));
        }
    }

    #[test]
    fn voice_note_duration_threshold() {
        assert_eq!(
            extract_voice_notes(&[n(0.0, 1.0, 60)], Voice::Highest, 0.5).members,
            vec![0]
        );
        assert!(extract_voice_notes(&[n(0.0, 0.4, 60)], Voice::Highest, 0.5)
            .members
            .is_empty());
    }

    #[test]
    fn melody_over_chord() {
        let notes = [
            n(0.0, 2.0, 48),
            n(0.0, 2.0, 55),
            n(0.0, 1.0, 72),
            n(1.0, 2.0, 74),
            // short grace note above the melody
            n(0.5, 0.7, 79),
        ];
        let high = extract_voice_notes(&notes, Voice::Highest, 0.5);
        // 72 is free on [0, 0.5) only: 0.5 is not > 0.5
        assert_eq!(high.members, vec![3]);
        let low = extract_voice_notes(&notes, Voice::Lowest, 0.5);
        assert_eq!(low.members, vec![0]);
    }

    #[test]
    fn arpeggiated_chord_needs_duration() {
        // middle note starts first but is only alone for 0.1 s
        let notes = [n(0.0, 2.0, 64), n(0.1, 2.0, 67)];
        let high = extract_voice_notes(&notes, Voice::Highest, 0.5);
        assert_eq!(high.members, vec![1]);
        assert_eq!(extract_voice_notes(&notes, Voice::Highest, 0.05).members, vec![0, 1]);
    }

    #[test]
    fn notewise_fp_above_everything() {
        let targets = [n(0.0, 1.0, 60)];
        let outputs = [n(0.0, 1.0, 60), n(0.0, 1.0, 84)];
        let m = max_match(&targets, &outputs, Criterion::OnsetOnly);
        assert_eq!(
            voice_notewise_counts(&targets, &outputs, &m, Voice::Highest, 0.5),
            PrfCounts::new(1, 1, 0)
        );
        assert_eq!(
            voice_notewise_counts(&targets, &outputs, &m, Voice::Lowest, 0.5),
            PrfCounts::new(1, 0, 0)
        );
        let m = max_match(&targets, &targets, Criterion::OnsetOnly);
        assert_eq!(
            voice_notewise_counts(&targets, &targets, &m, Voice::Highest, 0.5)
                .prf()
                .f_measure,
            1.0
        );
    }
}
