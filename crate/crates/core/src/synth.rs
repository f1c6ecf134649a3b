//! Seeded generator of short expressive tonal piano pieces, each with the
//! 16th-note grid it was performed against. Used for the rhythm validation
//! run, for the bundled chord table and in tests.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::harness::{BeatGrid, RhythmPiece};
use crate::model::{Note, NoteList, Role};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub bars: usize,
    /// Range of the base tempo in quarter notes per minute.
    pub tempo: (f64, f64),
    /// Relative amplitude of the slow tempo oscillation.
    pub tempo_drift: f64,
    /// Half-width of the uniform onset timing jitter in seconds.
    pub jitter: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            bars: 6,
            tempo: (84.0, 132.0),
            tempo_drift: 0.02,
            jitter: 0.012,
        }
    }
}

const MAJOR: [i64; 7] = [0, 2, 4, 5, 7, 9, 11];
// scale degrees (0-based) of the chord roots: I, ii, IV, V, vi
const PROGRESSION_ROOTS: [usize; 5] = [0, 1, 3, 4, 5];
// beat subdivisions in 16ths
const PATTERNS: [&[usize]; 6] = [&[4], &[2, 2], &[1, 1, 2], &[2, 1, 1], &[1, 1, 1, 1], &[3, 1]];

fn degree_pitch(tonic: i64, degree: i64) -> i64 {
    let octave = degree.div_euclid(7);
    tonic + 12 * octave + MAJOR[degree.rem_euclid(7) as usize]
}

/// One four-beat-per-bar piece: a melody over block-chord accompaniment.
pub fn tonal_piece<R: Rng + ?Sized>(rng: &mut R, params: &SynthParams) -> (NoteList, BeatGrid) {
    let sixteenths = params.bars * 16;
    let bpm = rng.gen_range(params.tempo.0..=params.tempo.1);
    let base = 60.0 / bpm / 4.0;
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let mut grid = Vec::with_capacity(sixteenths + 1);
    let mut t = 0.0;
    for k in 0..=sixteenths {
        grid.push(t);
        let x = std::f64::consts::TAU * k as f64 / sixteenths as f64 + phase;
        t += base * (1.0 + params.tempo_drift * x.sin());
    }

    let tonic = 60 + rng.gen_range(-5..=6);
    let jitter = |rng: &mut R| {
        if params.jitter > 0.0 {
            rng.gen_range(-params.jitter..=params.jitter)
        } else {
            0.0
        }
    };
    let mut notes = Vec::new();
    let mut push = |rng: &mut R, start: usize, len: usize, pitch: i64, velocity: i64| {
        let onset = (grid[start] + jitter(rng)).max(0.0);
        let duration = 0.9 * (grid[start + len] - grid[start]);
        notes.push(Note::new(onset, onset + duration, pitch, Some(velocity)).expect("generated note is valid"));
    };

    // accompaniment: a triad every half bar, root in the bass
    for half in 0..params.bars * 2 {
        let root = if half == 0 || half + 1 == params.bars * 2 {
            0
        } else {
            *PROGRESSION_ROOTS.choose(rng).expect("non-empty")
        } as i64;
        let start = half * 8;
        let velocity = rng.gen_range(45..=70);
        push(rng, start, 8, degree_pitch(tonic - 24, root), velocity);
        for third in [0, 2, 4] {
            push(rng, start, 8, degree_pitch(tonic - 12, root + third), velocity);
        }
    }

    // melody: a bounded random walk over the scale
    let mut degree: i64 = rng.gen_range(0..7);
    let mut pos = 0;
    while pos < sixteenths {
        let pattern = PATTERNS.choose(rng).expect("non-empty");
        for &len in pattern.iter() {
            degree = (degree + rng.gen_range(-2..=2)).clamp(-2, 11);
            let velocity = rng.gen_range(60..=100);
            push(rng, pos, len, degree_pitch(tonic, degree), velocity);
            pos += len;
        }
    }

    let list = NoteList::new(notes, Vec::new(), Role::Target).expect("velocities present");
    (list, BeatGrid::new(grid).expect("increasing grid"))
}

/// `count` pieces named `piece_000`, `piece_001`, ..., generated from `seed`.
pub fn tonal_corpus(count: usize, seed: u64, params: &SynthParams) -> Vec<RhythmPiece> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let (notes, grid) = tonal_piece(&mut rng, params);
            RhythmPiece {
                name: format!("piece_{i:03}"),
                notes,
                grid: Some(grid),
            }
        })
        .collect()
}
