//! Notes, note lists, sustain handling and 10 ms piano rolls.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_PITCH: u8 = 21;
pub const MAX_PITCH: u8 = 108;
pub const NUM_PITCHES: usize = 88;

/// Frame hop of every piano roll, in seconds.
pub const FRAME_DURATION: f64 = 0.010;
const FRAMES_PER_SECOND: f64 = 100.0;

/// Controller value at or above which the sustain pedal counts as down.
pub const PEDAL_DOWN_THRESHOLD: u8 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Note {
    onset: f64,
    offset: f64,
    pitch: u8,
    velocity: Option<u8>,
}

impl Note {
    pub fn new(onset: f64, offset: f64, pitch: i64, velocity: Option<i64>) -> Result<Self> {
        if !onset.is_finite() || !offset.is_finite() {
            return Err(Error::InvalidNote(format!("non-finite time ({onset}, {offset})")));
        }
        if onset < 0.0 {
            return Err(Error::InvalidNote(format!("negative onset {onset}")));
        }
        if offset <= onset {
            return Err(Error::InvalidNote(format!(
                "offset {offset} is not after onset {onset}"
            )));
        }
        if !(MIN_PITCH as i64..=MAX_PITCH as i64).contains(&pitch) {
            return Err(Error::PitchOutOfRange(pitch));
        }
        let velocity = match velocity {
            None => None,
            Some(v) if (1..=127).contains(&v) => Some(v as u8),
            Some(v) => {
                return Err(Error::InvalidNote(format!("velocity {v} outside 1..=127")));
            }
        };
        Ok(Note {
            onset,
            offset,
            pitch: pitch as u8,
            velocity,
        })
    }

    pub fn onset(&self) -> f64 {
        self.onset
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn pitch(&self) -> u8 {
        self.pitch
    }

    pub fn velocity(&self) -> Option<u8> {
        self.velocity
    }

    pub fn duration(&self) -> f64 {
        self.offset - self.onset
    }

    /// Row of this note in an 88-key piano roll.
    pub fn row(&self) -> usize {
        (self.pitch - MIN_PITCH) as usize
    }

    /// Signed overlap `min(e, e') - max(s, s')`; negative when disjoint.
    pub fn overlap(&self, other: &Note) -> f64 {
        self.offset.min(other.offset) - self.onset.max(other.onset)
    }

    pub fn without_velocity(mut self) -> Self {
        self.velocity = None;
        self
    }

    /// Same note with new times; the caller guarantees `offset > onset >= 0`.
    pub(crate) fn with_times(mut self, onset: f64, offset: f64) -> Self {
        debug_assert!(onset >= 0.0 && offset > onset);
        self.onset = onset;
        self.offset = offset;
        self
    }

    fn order(&self, other: &Note) -> Ordering {
        self.onset
            .total_cmp(&other.onset)
            .then(self.pitch.cmp(&other.pitch))
            .then(self.offset.total_cmp(&other.offset))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PedalEvent {
    pub time: f64,
    pub value: u8,
}

impl PedalEvent {
    pub fn is_down(&self) -> bool {
        self.value >= PEDAL_DOWN_THRESHOLD
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Target,
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PedalMode {
    WithPedal,
    WithoutPedal,
}

/// Notes sorted by `(onset, pitch, offset)` plus the sustain-pedal track.
#[derive(Debug, Clone, PartialEq)]
pub struct NoteList {
    notes: Vec<Note>,
    pedal: Vec<PedalEvent>,
    role: Role,
}

impl NoteList {
    pub fn new(mut notes: Vec<Note>, pedal: Vec<PedalEvent>, role: Role) -> Result<Self> {
        if pedal.windows(2).any(|w| w[1].time < w[0].time) {
            return Err(Error::UnsortedPedal);
        }
        notes.sort_by(Note::order);
        if role == Role::Target {
            if let Some(index) = notes.iter().position(|n| n.velocity.is_none()) {
                return Err(Error::MissingVelocity { index });
            }
        }
        Ok(NoteList { notes, pedal, role })
    }

    pub fn empty(role: Role) -> Self {
        NoteList {
            notes: Vec::new(),
            pedal: Vec::new(),
            role,
        }
    }

    pub fn notes(&self) -> &[Note] {
        &self.notes
    }

    pub fn pedal(&self) -> &[PedalEvent] {
        &self.pedal
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn len(&self) -> usize {
        self.notes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.notes.is_empty()
    }

    /// Largest offset, 0 for an empty list.
    pub fn duration(&self) -> f64 {
        self.notes.iter().map(Note::offset).fold(0.0, f64::max)
    }

    /// Re-label the list. Fails when asking for a target without velocities.
    pub fn with_role(self, role: Role) -> Result<Self> {
        NoteList::new(self.notes, self.pedal, role)
    }

    /// Copy of the list as an output transcription (velocities dropped).
    pub fn as_output(&self) -> NoteList {
        NoteList {
            notes: self.notes.iter().map(|n| n.without_velocity()).collect(),
            pedal: self.pedal.clone(),
            role: Role::Output,
        }
    }

    /// Replace the note vector, keeping pedal and role. Used by perturbations.
    pub(crate) fn with_notes(&self, notes: Vec<Note>) -> NoteList {
        let mut notes = notes;
        notes.sort_by(Note::order);
        NoteList {
            notes,
            pedal: self.pedal.clone(),
            role: self.role,
        }
    }

    /// The notes as they sound in the given pedal mode.
    pub fn sounding(&self, mode: PedalMode) -> NoteList {
        match mode {
            PedalMode::WithPedal => apply_sustain(self),
            PedalMode::WithoutPedal => self.clone(),
        }
    }
}

/// Extend note offsets while the sustain pedal is held.
///
/// A note whose key is released while the pedal is down keeps sounding until
/// the next pedal release, but never past the next onset of the same pitch.
/// A pedal that is never released sustains until the end of the list.
pub fn apply_sustain(list: &NoteList) -> NoteList {
    apply_sustain_with_threshold(list, PEDAL_DOWN_THRESHOLD)
}

pub fn apply_sustain_with_threshold(list: &NoteList, threshold: u8) -> NoteList {
    let pedal = &list.pedal;
    if pedal.is_empty() {
        return list.clone();
    }
    let end = list.duration();
    let notes = list
        .notes
        .iter()
        .map(|note| {
            let raw = note.offset;
            // Last event at or before the key release decides the pedal state.
            let last = pedal.partition_point(|ev| ev.time <= raw);
            let down = last > 0 && pedal[last - 1].value >= threshold;
            if !down {
                return *note;
            }
            let release = pedal[last..]
                .iter()
                .find(|ev| ev.value < threshold)
                .map_or(end, |ev| ev.time);
            let next_same = list
                .notes
                .iter()
                .filter(|other| other.pitch == note.pitch && other.onset > note.onset)
                .map(|other| other.onset)
                .fold(f64::INFINITY, f64::min);
            let extended = release.min(next_same).max(raw);
            note.with_times(note.onset, extended)
        })
        .collect();
    NoteList {
        notes,
        pedal: pedal.clone(),
        role: list.role,
    }
}

/// Smallest frame index whose start time is at or after `time`.
///
/// Frame starts are computed as `t / 100` so that decimal times such as 0.07
/// land on the frame a human would expect.
pub fn first_frame_at_or_after(time: f64) -> usize {
    if time <= 0.0 {
        return 0;
    }
    let mut t = (time * FRAMES_PER_SECOND).ceil().max(0.0) as usize;
    while t > 0 && frame_start(t - 1) >= time {
        t -= 1;
    }
    while frame_start(t) < time {
        t += 1;
    }
    t
}

pub fn frame_start(t: usize) -> f64 {
    t as f64 / FRAMES_PER_SECOND
}

/// Number of frames needed to cover `duration` seconds.
pub fn frame_count(duration: f64) -> usize {
    first_frame_at_or_after(duration)
}

/// Binary 88 x T activity matrix with 10 ms frames.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PianoRoll {
    // row-major: cells[row * frames + t]
    cells: Vec<bool>,
    frames: usize,
    pedal_mode: PedalMode,
}

impl PianoRoll {
    pub fn zeros(frames: usize, pedal_mode: PedalMode) -> Self {
        PianoRoll {
            cells: vec![false; NUM_PITCHES * frames],
            frames,
            pedal_mode,
        }
    }

    /// Render `notes` over `total_duration` seconds. A cell is active when a
    /// note of that pitch satisfies `onset <= frame_start < offset`.
    pub fn from_notes(notes: &NoteList, pedal_mode: PedalMode, total_duration: f64) -> Self {
        Self::from_notes_with_frames(notes, pedal_mode, frame_count(total_duration))
    }

    pub fn from_notes_with_frames(notes: &NoteList, pedal_mode: PedalMode, frames: usize) -> Self {
        Self::from_sounding(notes.sounding(pedal_mode).notes(), pedal_mode, frames)
    }

    /// Render notes whose offsets already reflect `pedal_mode`.
    pub fn from_sounding(notes: &[Note], pedal_mode: PedalMode, frames: usize) -> Self {
        let mut roll = PianoRoll::zeros(frames, pedal_mode);
        for note in notes {
            let start = first_frame_at_or_after(note.onset).min(frames);
            let stop = first_frame_at_or_after(note.offset).min(frames);
            let base = note.row() * frames;
            roll.cells[base + start..base + stop].fill(true);
        }
        roll
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn frame_duration(&self) -> f64 {
        FRAME_DURATION
    }

    pub fn pedal_mode(&self) -> PedalMode {
        self.pedal_mode
    }

    /// Cell by row index (0 = MIDI 21).
    pub fn get(&self, row: usize, t: usize) -> bool {
        self.cells[row * self.frames + t]
    }

    /// Cell by MIDI pitch; pitches outside the keyboard read as inactive.
    pub fn is_active(&self, pitch: i32, t: usize) -> bool {
        if pitch < MIN_PITCH as i32 || pitch > MAX_PITCH as i32 || t >= self.frames {
            return false;
        }
        self.get((pitch - MIN_PITCH as i32) as usize, t)
    }

    pub fn set(&mut self, row: usize, t: usize, value: bool) {
        self.cells[row * self.frames + t] = value;
    }

    pub fn row(&self, row: usize) -> &[bool] {
        &self.cells[row * self.frames..(row + 1) * self.frames]
    }

    /// Number of active pitches in frame `t`.
    pub fn polyphony(&self, t: usize) -> usize {
        (0..NUM_PITCHES).filter(|&r| self.get(r, t)).count()
    }

    pub fn active_cells(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub(crate) fn check_same_shape(&self, other: &PianoRoll) -> Result<()> {
        if self.frames != other.frames {
            return Err(Error::DimensionMismatch {
                left: self.frames,
                right: other.frames,
            });
        }
        Ok(())
    }
}

/// Active `[start, stop)` frame runs of one roll row.
pub fn row_runs(roll: &PianoRoll, row: usize) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (t, &on) in roll.row(row).iter().enumerate() {
        match (on, start) {
            (true, None) => start = Some(t),
            (false, Some(s)) => {
                runs.push((s, t));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, roll.frames()));
    }
    runs
}
