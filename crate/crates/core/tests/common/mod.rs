//! Random instance generators and independent brute-force oracles.

#![allow(dead_code)]

use amt_eval::model::{Note, PianoRoll};
use rand::Rng;

pub fn note(s: f64, e: f64, p: i64, v: Option<i64>) -> Note {
    Note::new(s, e, p, v).unwrap()
}

/// Notes whose times are whole multiples of `step` seconds.
pub fn random_notes<R: Rng>(
    rng: &mut R,
    count: usize,
    slots: u32,
    step: f64,
    pitches: std::ops::RangeInclusive<i64>,
    velocities: bool,
) -> Vec<Note> {
    (0..count)
        .map(|_| {
            let start = rng.gen_range(0..slots);
            let len = rng.gen_range(1..=slots / 2 + 1);
            let v = velocities.then(|| rng.gen_range(1..=127));
            note(
                f64::from(start) * step,
                f64::from(start + len) * step,
                rng.gen_range(pitches.clone()),
                v,
            )
        })
        .collect()
}

/// Onset within 50 ms; for the offset criterion also the offset within
/// `max(50 ms, 0.2 * target duration)`. Pitches must agree.
pub fn admissible(with_offset: bool, t: &Note, o: &Note) -> bool {
    if t.pitch() != o.pitch() {
        return false;
    }
    if (o.onset() - t.onset()).abs() >= 0.05 {
        return false;
    }
    if !with_offset {
        return true;
    }
    let dur = t.offset() - t.onset();
    let limit = if 0.2 * dur > 0.05 { 0.2 * dur } else { 0.05 };
    (o.offset() - t.offset()).abs() < limit
}

/// Size of a maximum matching by exhaustive search over assignments.
pub fn brute_force_matching(targets: &[Note], outputs: &[Note], with_offset: bool) -> usize {
    fn go(i: usize, targets: &[Note], outputs: &[Note], used: &mut Vec<bool>, with_offset: bool) -> usize {
        if i == targets.len() {
            return 0;
        }
        let mut best = go(i + 1, targets, outputs, used, with_offset);
        for j in 0..outputs.len() {
            if !used[j] && admissible(with_offset, &targets[i], &outputs[j]) {
                used[j] = true;
                best = best.max(1 + go(i + 1, targets, outputs, used, with_offset));
                used[j] = false;
            }
        }
        best
    }
    go(0, targets, outputs, &mut vec![false; outputs.len()], with_offset)
}

/// Dense `[pitch 21..=108][frame]` grid: a cell is on when some note of the
/// pitch has `onset <= t/100 < offset`.
pub fn roll_oracle(notes: &[Note], frames: usize) -> Vec<Vec<bool>> {
    let mut grid = vec![vec![false; frames]; 88];
    for (row, cells) in grid.iter_mut().enumerate() {
        for (t, cell) in cells.iter_mut().enumerate() {
            let time = t as f64 / 100.0;
            *cell = notes
                .iter()
                .any(|n| usize::from(n.pitch()) - 21 == row && n.onset() <= time && time < n.offset());
        }
    }
    grid
}

pub fn dense(roll: &PianoRoll) -> Vec<Vec<bool>> {
    (0..88)
        .map(|r| (0..roll.frames()).map(|t| roll.get(r, t)).collect())
        .collect()
}

pub fn random_roll<R: Rng>(rng: &mut R, frames: usize, density: f64) -> PianoRoll {
    let mut roll = PianoRoll::zeros(frames, amt_eval::PedalMode::WithoutPedal);
    for r in 0..88 {
        for t in 0..frames {
            if rng.gen_bool(density) {
                roll.set(r, t, true);
            }
        }
    }
    roll
}

/// (tp, fp, fn) by visiting every cell.
pub fn framewise_oracle(target: &[Vec<bool>], output: &[Vec<bool>]) -> (usize, usize, usize) {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for p in 0..target.len() {
        for t in 0..target[p].len() {
            match (target[p][t], output[p][t]) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                _ => {}
            }
        }
    }
    (tp, fp, fn_)
}

/// Specific pitch error cells: output on, target off, a target neighbour at
/// the interval (only below for 19 semitones), and the target row silent
/// over the `lookback` preceding frames. Returns (errors, false positives).
pub fn specific_framewise_oracle(
    target: &[Vec<bool>],
    output: &[Vec<bool>],
    interval: i64,
    lookback: usize,
) -> (usize, usize) {
    let frames = target[0].len();
    let on = |grid: &[Vec<bool>], p: i64, t: usize| (0..88).contains(&p) && grid[p as usize][t];
    let (mut errors, mut fps) = (0, 0);
    for p in 0..88i64 {
        for t in 0..frames {
            if !(on(output, p, t) && !on(target, p, t)) {
                continue;
            }
            fps += 1;
            let below = on(target, p - interval, t);
            let above = interval != 19 && on(target, p + interval, t);
            let mut quiet = true;
            for k in 1..=lookback {
                if t >= k && on(target, p, t - k) {
                    quiet = false;
                }
            }
            if (below || above) && quiet {
                errors += 1;
            }
        }
    }
    (errors, fps)
}

fn overlap_fraction(a: &Note, b: &Note) -> f64 {
    let lo = if a.onset() > b.onset() { a.onset() } else { b.onset() };
    let hi = if a.offset() < b.offset() {
        a.offset()
    } else {
        b.offset()
    };
    (hi - lo) / (a.offset() - a.onset())
}

pub fn specific_notewise_oracle(
    targets: &[Note],
    outputs: &[Note],
    output_matched: &[bool],
    interval: i64,
    threshold: f64,
) -> usize {
    let mut count = 0;
    for (o, out) in outputs.iter().enumerate() {
        if output_matched[o] {
            continue;
        }
        let explained = targets.iter().any(|t| {
            let diff = i64::from(out.pitch()) - i64::from(t.pitch());
            let related = if interval == 19 {
                diff == 19
            } else {
                diff.abs() == interval
            };
            related && overlap_fraction(out, t) > threshold
        });
        if explained {
            count += 1;
        }
    }
    count
}

/// Repeated notes with the roles given: `side` notes that are unmatched,
/// overlap a same-pitch `other` note by more than the threshold, while some
/// other `side` note ending before them also does.
pub fn fragment_oracle(side: &[Note], side_matched: &[bool], other: &[Note], threshold: f64) -> usize {
    let mut count = 0;
    for i in 0..side.len() {
        if side_matched[i] {
            continue;
        }
        let mut hit = false;
        for anchor in other {
            if anchor.pitch() != side[i].pitch() || overlap_fraction(&side[i], anchor) <= threshold {
                continue;
            }
            for j in 0..side.len() {
                if j != i
                    && side[j].pitch() == anchor.pitch()
                    && overlap_fraction(&side[j], anchor) > threshold
                    && side[j].offset() < side[i].onset()
                {
                    hit = true;
                }
            }
        }
        if hit {
            count += 1;
        }
    }
    count
}

/// Decayed velocity of a note at integer millisecond `t_ms`, with the
/// note's own times given in milliseconds.
pub fn decayed_velocity_ms(note: &Note, t_ms: i64) -> f64 {
    let s = (note.onset() * 1000.0).round() as i64;
    let e = (note.offset() * 1000.0).round() as i64;
    if t_ms < s || t_ms > e {
        return 0.0;
    }
    let a = 0.050532 + 0.021292 * f64::from(note.pitch());
    let elapsed = ((t_ms - s) as f64 / 1000.0).min(1.0);
    f64::from(note.velocity().unwrap()) * (-a * elapsed).exp()
}

/// Loudness ratio of a missed note from envelopes sampled every millisecond
/// over `[s - 50 ms, s + 50 ms]`.
pub fn loudness_ratio_oracle(targets: &[Note], missed: usize) -> f64 {
    let s = (targets[missed].onset() * 1000.0).round() as i64;
    let mut loudest: f64 = 0.0;
    for t_ms in s - 50..=s + 50 {
        for n in targets {
            loudest = loudest.max(decayed_velocity_ms(n, t_ms));
        }
    }
    f64::from(targets[missed].velocity().unwrap()) / loudest
}

pub fn norm_loudness_oracle(targets: &[Note], missed: usize) -> f64 {
    let s = targets[missed].onset();
    let neighbours: Vec<f64> = targets
        .iter()
        .filter(|n| (n.onset() - s).abs() < 1.0)
        .map(|n| f64::from(n.velocity().unwrap()))
        .collect();
    let sum: f64 = neighbours.iter().sum();
    f64::from(targets[missed].velocity().unwrap()) * neighbours.len() as f64 / sum
}

pub fn hz(pitch: u8) -> f64 {
    440.0 * 2f64.powf((f64::from(pitch) - 69.0) / 12.0)
}

/// Roughness by direct summation over every pair of partials, merging
/// coincident partials with a quadratic scan.
pub fn roughness_oracle(chord: &[u8]) -> f64 {
    let mut pitches: Vec<u8> = chord.to_vec();
    pitches.sort();
    pitches.dedup();
    let mut freqs: Vec<f64> = Vec::new();
    let mut amps: Vec<f64> = Vec::new();
    for &p in &pitches {
        for n in 1..=11 {
            let f = hz(p) * n as f64;
            let a = 1.0 / n as f64;
            match freqs.iter().position(|&g| (g - f).abs() <= 1e-9 * f.max(g)) {
                Some(k) => amps[k] += a,
                None => {
                    freqs.push(f);
                    amps.push(a);
                }
            }
        }
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..freqs.len() {
        den += amps[i] * amps[i];
        for j in 0..freqs.len() {
            if j <= i {
                continue;
            }
            let mean = (freqs[i] + freqs[j]) / 2.0;
            let y = (freqs[i] - freqs[j]).abs() / (1.72 * mean.powf(0.65));
            if y <= 1.2 {
                let g = ((y / 0.25) * (1.0 - y / 0.25).exp()).powi(2);
                num += amps[i] * amps[j] * g;
            }
        }
    }
    num / den
}

/// 1200-bin pitch-class spectrum of harmonic complex tones at the given
/// positions in cents, built bin by bin.
pub fn spectrum_oracle(positions: &[f64]) -> Vec<f64> {
    let sigma: f64 = 6.83;
    let mut out = vec![0.0; 1200];
    for &pos in positions {
        for n in 1..=12 {
            let centre = (pos + 1200.0 * (n as f64).log2()).rem_euclid(1200.0);
            let w = (n as f64).powf(-0.75);
            for (b, cell) in out.iter_mut().enumerate() {
                let d = (b as f64 - centre).abs();
                let d = d.min(1200.0 - d);
                *cell += w * (-(d * d) / (2.0 * sigma * sigma)).exp();
            }
        }
    }
    out
}

/// Best cosine similarity over all template rotations, computed directly.
pub fn harmonicity_oracle(chord: &[u8]) -> f64 {
    let mut pitches: Vec<u8> = chord.to_vec();
    pitches.sort();
    pitches.dedup();
    let positions: Vec<f64> = pitches.iter().map(|&p| 100.0 * f64::from(p % 12)).collect();
    let chord_spec = spectrum_oracle(&positions);
    let template = spectrum_oracle(&[0.0]);
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut best = f64::NEG_INFINITY;
    for k in 0..1200 {
        let dot: f64 = (0..1200).map(|b| chord_spec[b] * template[(b + 1200 - k) % 1200]).sum();
        best = best.max(dot / (norm(&chord_spec) * norm(&template)));
    }
    best
}

/// Event segments by probing the midpoint of every boundary interval.
pub fn segments_oracle(notes: &[Note]) -> Vec<(f64, f64, Vec<u8>)> {
    let mut bounds: Vec<f64> = Vec::new();
    for n in notes {
        for b in [n.onset(), n.offset()] {
            if !bounds.contains(&b) {
                bounds.push(b);
            }
        }
    }
    bounds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out = Vec::new();
    for w in bounds.windows(2) {
        let mid = (w[0] + w[1]) / 2.0;
        let mut chord: Vec<u8> = notes
            .iter()
            .filter(|n| n.onset() < mid && mid < n.offset())
            .map(|n| n.pitch())
            .collect();
        chord.sort();
        chord.dedup();
        out.push((w[0], w[1], chord));
    }
    out
}

/// Free stretches sampled in milliseconds: the longest run of sample
/// midpoints where no blocking note sounds, in whole milliseconds.
pub fn longest_free_run_ms(note: &Note, blockers: &[&Note]) -> i64 {
    let ms = |x: f64| (x * 1000.0).round() as i64;
    let (s, e) = (ms(note.onset()), ms(note.offset()));
    let mut best = 0;
    let mut run = 0;
    for t in s..e {
        let mid = t as f64 + 0.5;
        let blocked = blockers
            .iter()
            .any(|b| (ms(b.onset()) as f64) <= mid && mid <= ms(b.offset()) as f64);
        if blocked {
            run = 0;
        } else {
            run += 1;
            best = best.max(run);
        }
    }
    best
}

/// Whether the note is strictly the top (or bottom) of `others` for longer
/// than `min_ms` milliseconds.
pub fn voice_member_oracle(note: &Note, others: &[&Note], highest: bool, min_ms: i64) -> bool {
    let blockers: Vec<&Note> = others
        .iter()
        .copied()
        .filter(|o| {
            if highest {
                o.pitch() >= note.pitch()
            } else {
                o.pitch() <= note.pitch()
            }
        })
        .collect();
    longest_free_run_ms(note, &blockers) > min_ms
}

pub fn vlq(mut v: u32) -> Vec<u8> {
    let mut out = vec![(v & 0x7f) as u8];
    v >>= 7;
    while v > 0 {
        out.insert(0, (v & 0x7f) as u8 | 0x80);
        v >>= 7;
    }
    out
}

/// Track chunk from `(delta, raw event bytes)` pairs; end-of-track appended.
pub fn track(events: &[(u32, &[u8])]) -> Vec<u8> {
    let mut body = Vec::new();
    for (delta, bytes) in events {
        body.extend(vlq(*delta));
        body.extend_from_slice(bytes);
    }
    body.extend([0x00, 0xff, 0x2f, 0x00]);
    let mut out = b"MTrk".to_vec();
    out.extend((body.len() as u32).to_be_bytes());
    out.extend(body);
    out
}

pub fn smf(format: u16, ticks_per_quarter: u16, tracks: &[Vec<u8>]) -> Vec<u8> {
    let mut out = b"MThd".to_vec();
    out.extend(6u32.to_be_bytes());
    out.extend(format.to_be_bytes());
    out.extend((tracks.len() as u16).to_be_bytes());
    out.extend(ticks_per_quarter.to_be_bytes());
    for t in tracks {
        out.extend_from_slice(t);
    }
    out
}

/// Format-1 file exercising a tempo change, running status, a zero-velocity
/// note-off and a sustain pedal press.
///
/// At 480 ticks per quarter: 120 BPM until tick 960 (1.0 s), then 240 BPM.
/// Notes: 60 over [0, 0.5], 64 over [0.5, 1.25], 67 over [1.25, 1.375];
/// pedal down at 1.25 s, up at 1.5 s.
pub fn fixture_smf() -> Vec<u8> {
    let tempo = track(&[
        (0, &[0xff, 0x51, 0x03, 0x07, 0xa1, 0x20]),
        (960, &[0xff, 0x51, 0x03, 0x03, 0xd0, 0x90]),
    ]);
    let notes = track(&[
        (0, &[0x90, 60, 100]),
        (480, &[0x80, 60, 0]),
        (0, &[0x90, 64, 90]),
        (960, &[64, 0]),
        (0, &[0xb0, 64, 127]),
        (0, &[0x90, 67, 80]),
        (240, &[0x80, 67, 64]),
        (240, &[0xb0, 64, 0]),
    ]);
    smf(1, 480, &[tempo, notes])
}
