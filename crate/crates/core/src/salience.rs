//! Salience of mistakes: loudness of missed notes, out-of-key insertions and
//! polyphony-level differences.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matching::Matching;
use crate::model::{Note, PianoRoll, MAX_PITCH, MIN_PITCH, NUM_PITCHES};
use crate::stats::Summary;

/// Half-width of the neighbourhood used to normalise a missed note's velocity.
pub const DEFAULT_LOUDNESS_WINDOW: f64 = 1.0;
/// Half-width of the window around a missed onset searched for the loudest note.
pub const DEFAULT_RATIO_WINDOW: f64 = 0.050;
pub const DEFAULT_PROFILE_THRESHOLD: f64 = 0.1;

/// Linear fit of piano decay rate against MIDI pitch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayModel {
    pub intercept: f64,
    pub slope: f64,
    /// Time after the onset at which the decay stops, in seconds.
    pub horizon: f64,
}

impl Default for DecayModel {
    fn default() -> Self {
        DecayModel {
            intercept: 0.050532,
            slope: 0.021292,
            horizon: 1.0,
        }
    }
}

impl DecayModel {
    /// Decay rate per second for a MIDI pitch.
    pub fn rate(&self, pitch: u8) -> f64 {
        self.intercept + self.slope * f64::from(pitch)
    }

    /// Velocity envelope of `note` at time `t`: exponential decay from the
    /// onset, frozen after the horizon, zero outside the note.
    pub fn velocity_at(&self, note: &Note, velocity: f64, t: f64) -> f64 {
        if t < note.onset() || t > note.offset() {
            return 0.0;
        }
        let elapsed = (t - note.onset()).min(self.horizon);
        velocity * (-self.rate(note.pitch()) * elapsed).exp()
    }

    /// Maximum of the envelope over `[from, to]`. The envelope is
    /// non-increasing on the note, so the maximum sits at the earliest
    /// sounding instant of the window.
    pub fn max_velocity_in(&self, note: &Note, velocity: f64, from: f64, to: f64) -> f64 {
        let start = from.max(note.onset());
        if start > to.min(note.offset()) {
            return 0.0;
        }
        self.velocity_at(note, velocity, start)
    }
}

pub fn decay_rate(pitch: i64) -> Result<f64> {
    if !(MIN_PITCH as i64..=MAX_PITCH as i64).contains(&pitch) {
        return Err(Error::PitchOutOfRange(pitch));
    }
    Ok(DecayModel::default().rate(pitch as u8))
}

/// Time-varying velocity of a target note under the default decay model.
pub fn time_varying_velocity(note: &Note, t: f64) -> Result<f64> {
    let v = note
        .velocity()
        .ok_or_else(|| Error::InvalidNote("note has no velocity".into()))?;
    Ok(DecayModel::default().velocity_at(note, f64::from(v), t))
}

fn velocity(targets: &[Note], i: usize) -> Result<f64> {
    targets[i]
        .velocity()
        .map(f64::from)
        .ok_or(Error::MissingVelocity { index: i })
}

/// Mean over false negatives of `v * |V| / sum(V)`, where `V` holds every
/// target note with onset closer than `window` seconds. `None` when nothing
/// was missed.
pub fn normalized_fn_loudness(targets: &[Note], matching: &Matching, window: f64) -> Result<Option<f64>> {
    let mut values = Vec::new();
    for i in matching.unmatched_targets() {
        let v = velocity(targets, i)?;
        let mut count = 0usize;
        let mut sum = 0.0;
        for (j, other) in targets.iter().enumerate() {
            if (targets[i].onset() - other.onset()).abs() < window {
                count += 1;
                sum += velocity(targets, j)?;
            }
        }
        values.push(v * count as f64 / sum);
    }
    Ok(crate::stats::mean(&values))
}

/// Mean over false negatives of the missed velocity divided by the loudest
/// decayed target velocity within `window` seconds of its onset.
pub fn fn_loudness_ratio(
    targets: &[Note],
    matching: &Matching,
    window: f64,
    decay: &DecayModel,
) -> Result<Option<f64>> {
    let mut values = Vec::new();
    for i in matching.unmatched_targets() {
        let v = velocity(targets, i)?;
        let s = targets[i].onset();
        let mut loudest: f64 = 0.0;
        for (j, other) in targets.iter().enumerate() {
            let vj = velocity(targets, j)?;
            loudest = loudest.max(decay.max_velocity_in(other, vj, s - window, s + window));
        }
        values.push(v / loudest);
    }
    Ok(crate::stats::mean(&values))
}

/// Fraction of frames each pitch class is active in the target.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PitchProfile {
    pub fitness: [f64; 12],
    pub threshold: f64,
}

impl PitchProfile {
    pub fn in_key(&self, pitch_class: usize) -> bool {
        self.fitness[pitch_class] > self.threshold
    }

    /// Pitch classes active more often than the threshold.
    pub fn binary_set(&self) -> Vec<usize> {
        (0..12).filter(|&q| self.in_key(q)).collect()
    }

    pub fn disagreement(&self, pitch: u8) -> f64 {
        1.0 - self.fitness[usize::from(pitch) % 12]
    }
}

/// Build the profile from a roll of the target without pedal.
pub fn build_pitch_profile(target: &PianoRoll, threshold: f64) -> PitchProfile {
    let frames = target.frames();
    let mut fitness = [0.0; 12];
    if frames > 0 {
        for (q, f) in fitness.iter_mut().enumerate() {
            let rows: Vec<usize> = (0..NUM_PITCHES)
                .filter(|r| (r + MIN_PITCH as usize) % 12 == q)
                .collect();
            let active = (0..frames).filter(|&t| rows.iter().any(|&r| target.get(r, t))).count();
            *f = active as f64 / frames as f64;
        }
    }
    PitchProfile { fitness, threshold }
}

/// `(out-of-key fps / |outputs|, out-of-key fps / fps)`; the second is
/// `None` without false positives.
pub fn out_of_key_binary(outputs: &[Note], matching: &Matching, profile: &PitchProfile) -> (f64, Option<f64>) {
    let fps: Vec<usize> = matching.unmatched_outputs().collect();
    let out_of_key = fps
        .iter()
        .filter(|&&o| !profile.in_key(usize::from(outputs[o].pitch()) % 12))
        .count();
    let over_all = if outputs.is_empty() {
        0.0
    } else {
        out_of_key as f64 / outputs.len() as f64
    };
    let over_fp = (!fps.is_empty()).then(|| out_of_key as f64 / fps.len() as f64);
    (over_all, over_fp)
}

/// Key disagreement `1 - F(q)` of false positives:
/// `(mean over fps / mean over all outputs, mean over fps)`.
///
/// Both are `None` without false positives; the normalised value is 0 when
/// every output note sits on a fully active pitch class.
pub fn out_of_key_nonbinary(
    outputs: &[Note],
    matching: &Matching,
    profile: &PitchProfile,
) -> (Option<f64>, Option<f64>) {
    let fp_values: Vec<f64> = matching
        .unmatched_outputs()
        .map(|o| profile.disagreement(outputs[o].pitch()))
        .collect();
    let Some(mean_fp) = crate::stats::mean(&fp_values) else {
        return (None, None);
    };
    let all: Vec<f64> = outputs.iter().map(|n| profile.disagreement(n.pitch())).collect();
    let mean_all = crate::stats::mean(&all).unwrap_or(0.0);
    let normalized = if mean_all == 0.0 { 0.0 } else { mean_fp / mean_all };
    (Some(normalized), Some(mean_fp))
}

/// Absolute per-frame difference in the number of sounding pitches.
pub fn polyphony_series(target: &PianoRoll, output: &PianoRoll) -> Result<Vec<usize>> {
    target.check_same_shape(output)?;
    Ok((0..target.frames())
        .map(|t| output.polyphony(t).abs_diff(target.polyphony(t)))
        .collect())
}

/// Mean, population standard deviation, min and max of the polyphony
/// difference. All zero for an empty roll.
pub fn polyphony_features(target: &PianoRoll, output: &PianoRoll) -> Result<Summary> {
    let series: Vec<f64> = polyphony_series(target, output)?
        .into_iter()
        .map(|d| d as f64)
        .collect();
    Ok(Summary::of(&series).unwrap_or(Summary::ZERO))
}
