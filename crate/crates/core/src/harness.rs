//! Rhythm perturbations and the validation run that checks the rhythm
//! features react to them as expected.
//!
//! Four conditions are derived from each target piece, from most to least
//! regular: quantisation to a constant-tempo 16th grid, quantisation to the
//! piece's own time-varying 16th grid, and uniform onset noise of ±100 ms and
//! ±300 ms. Quantisation and noise move whole notes, so durations are kept.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::EvalConfig;
use crate::error::{Error, Result};
use crate::evaluate::row_seed;
use crate::ingest::load_notes;
use crate::model::{Note, NoteList, Role};
use crate::rhythm::{flatness_features, rhythm_dispersion};
use crate::stats::mean_and_sample_std;

/// Strictly increasing 16th-note times in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct BeatGrid {
    times: Vec<f64>,
}

impl BeatGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidParameter("a beat grid needs at least two points".into()));
        }
        if let Some(i) = times
            .windows(2)
            .position(|w| !w[0].is_finite() || !w[1].is_finite() || w[1] <= w[0])
        {
            return Err(Error::Grid {
                line: i + 2,
                message: "grid times must be finite and strictly increasing".into(),
            });
        }
        Ok(BeatGrid { times })
    }

    /// Regular grid from `origin` with the given period, covering `until`.
    pub fn uniform(origin: f64, period: f64, until: f64) -> Result<Self> {
        if period.is_nan() || period <= 0.0 {
            return Err(Error::InvalidParameter("grid period must be positive".into()));
        }
        let count = ((until - origin) / period).ceil().max(1.0) as usize + 1;
        BeatGrid::new((0..count).map(|k| origin + k as f64 * period).collect())
    }

    /// One time per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut times = Vec::new();
        let mut last: Option<(usize, f64)> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Grid { line: i + 1, message };
            let t: f64 = line.parse().map_err(|_| err(format!("`{line}` is not a number")))?;
            if !t.is_finite() {
                return Err(err(format!("`{line}` is not finite")));
            }
            if let Some((_, prev)) = last {
                if t <= prev {
                    return Err(err("grid times must be strictly increasing".into()));
                }
            }
            last = Some((i, t));
            times.push(t);
        }
        BeatGrid::new(times)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        BeatGrid::parse(&text)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn to_text(&self) -> String {
        self.times.iter().map(|t| format!("{t}\n")).collect()
    }

    pub fn mean_period(&self) -> f64 {
        (self.times[self.times.len() - 1] - self.times[0]) / (self.times.len() - 1) as f64
    }

    /// Nearest grid point, ties going to the earlier one. Outside the grid
    /// the first or last spacing is extended.
    pub fn snap(&self, t: f64) -> f64 {
        let g = &self.times;
        let n = g.len();
        if t <= g[0] {
            return snap_uniform(t, g[0], g[1] - g[0]);
        }
        if t >= g[n - 1] {
            return snap_uniform(t, g[n - 1], g[n - 1] - g[n - 2]);
        }
        let i = g.partition_point(|&x| x <= t);
        let (lo, hi) = (g[i - 1], g[i]);
        if t - lo <= hi - t {
            lo
        } else {
            hi
        }
    }
}

fn snap_uniform(t: f64, origin: f64, period: f64) -> f64 {
    let mut k = ((t - origin) / period).round();
    // never snap before time zero
    while origin + k * period < 0.0 {
        k += 1.0;
    }
    origin + k * period
}

#[derive(Debug, Clone, PartialEq)]
pub enum Perturbation {
    /// Snap onsets to `origin + k * period`.
    QuantConstant { origin: f64, period: f64 },
    /// Snap onsets to the nearest point of a time-varying grid.
    Quant(BeatGrid),
    /// Shift each onset by uniform noise in `[-half_width, half_width]`.
    Noisy { half_width: f64 },
}

impl Perturbation {
    /// Constant grid with the average spacing of a time-varying one.
    pub fn constant_from_grid(grid: &BeatGrid) -> Self {
        Perturbation::QuantConstant {
            origin: grid.times()[0],
            period: grid.mean_period(),
        }
    }

    /// Constant 16th grid at `bpm` quarter notes per minute, from time 0.
    pub fn constant_from_tempo(bpm: f64) -> Result<Self> {
        if !(bpm.is_finite() && bpm > 0.0) {
            return Err(Error::InvalidParameter("tempo must be positive".into()));
        }
        Ok(Perturbation::QuantConstant {
            origin: 0.0,
            period: 60.0 / bpm / 4.0,
        })
    }
}

/// Apply a perturbation, keeping pitches, velocities and durations.
pub fn perturb<R: Rng + ?Sized>(list: &NoteList, perturbation: &Perturbation, rng: &mut R) -> NoteList {
    let shift = |note: &Note, onset: f64| {
        let onset = onset.max(0.0);
        note.with_times(onset, onset + note.duration())
    };
    let notes = list
        .notes()
        .iter()
        .map(|n| match perturbation {
            Perturbation::QuantConstant { origin, period } => shift(n, snap_uniform(n.onset(), *origin, *period)),
            Perturbation::Quant(grid) => shift(n, grid.snap(n.onset())),
            Perturbation::Noisy { half_width } if *half_width == 0.0 => *n,
            Perturbation::Noisy { half_width } => shift(n, n.onset() + rng.gen_range(-half_width..=*half_width)),
        })
        .collect();
    list.with_notes(notes)
}

/// The eight rhythm features, in report order.
pub const RHYTHM_FEATURES: [&str; 8] = [
    "Spectral Flatness Output",
    "Spectral Flatness Difference",
    "Dispersion Avg. std Change",
    "Dispersion Min. std Change",
    "Dispersion Max. std Change",
    "Dispersion Avg. Drift",
    "Dispersion Min. Drift",
    "Dispersion Max. Drift",
];

pub fn rhythm_features(target: &NoteList, output: &NoteList, cfg: &EvalConfig) -> [Option<f64>; 8] {
    let (flat, diff) = flatness_features(target.notes(), output.notes(), &cfg.fine_bins(), cfg.flatness_epsilon);
    let d = rhythm_dispersion(target.notes(), output.notes(), &cfg.dispersion());
    [
        Some(flat),
        Some(diff),
        d.map(|d| d.std_change.mean),
        d.map(|d| d.std_change.min),
        d.map(|d| d.std_change.max),
        d.map(|d| d.drift.mean),
        d.map(|d| d.drift.min),
        d.map(|d| d.drift.max),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Condition {
    QuantConstant,
    Quant,
    /// Noise half-width in milliseconds.
    Noisy(u32),
}

impl Condition {
    pub fn name(&self) -> String {
        match self {
            Condition::QuantConstant => "Quant-constant".into(),
            Condition::Quant => "Quant".into(),
            Condition::Noisy(ms) => format!("Noisy-{ms}"),
        }
    }

    pub fn standard() -> Vec<Condition> {
        vec![
            Condition::QuantConstant,
            Condition::Quant,
            Condition::Noisy(100),
            Condition::Noisy(300),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct RhythmPiece {
    pub name: String,
    pub notes: NoteList,
    pub grid: Option<BeatGrid>,
}

#[derive(Debug, Clone)]
pub struct ValidationOptions {
    pub conditions: Vec<Condition>,
    pub seeds: Vec<u64>,
    /// Constant tempo for Quant-constant when a piece has no grid.
    pub tempo: Option<f64>,
    pub config: EvalConfig,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            conditions: Condition::standard(),
            seeds: vec![0],
            tempo: None,
            config: EvalConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub condition: String,
    /// Number of (piece, seed) evaluations.
    pub samples: usize,
    pub mean: [Option<f64>; 8],
    pub std: [Option<f64>; 8],
    /// Raw per-sample features, in evaluation order.
    #[serde(skip)]
    pub values: Vec<[Option<f64>; 8]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhythmReport {
    pub conditions: Vec<ConditionReport>,
    pub notices: Vec<String>,
}

fn summarise(condition: String, values: Vec<[Option<f64>; 8]>) -> ConditionReport {
    let mut mean = [None; 8];
    let mut std = [None; 8];
    for f in 0..8 {
        let column: Vec<f64> = values.iter().filter_map(|v| v[f]).collect();
        if let Some((m, s)) = mean_and_sample_std(&column) {
            mean[f] = Some(m);
            std[f] = Some(s);
        }
    }
    ConditionReport {
        condition,
        samples: values.len(),
        mean,
        std,
        values,
    }
}

fn condition_tag(condition: Condition) -> u64 {
    match condition {
        Condition::QuantConstant => 1,
        Condition::Quant => 2,
        Condition::Noisy(ms) => 1000 + u64::from(ms),
    }
}

/// Perturb every piece under every condition and summarise the rhythm
/// features per condition. Quantised conditions are deterministic and run
/// once per piece; noisy ones run once per seed.
pub fn validate_rhythm(pieces: &[RhythmPiece], options: &ValidationOptions) -> RhythmReport {
    let mut notices = Vec::new();
    let mut conditions = Vec::new();
    for &condition in &options.conditions {
        let mut values = Vec::new();
        let mut missing = Vec::new();
        for (index, piece) in pieces.iter().enumerate() {
            let perturbation = match condition {
                Condition::QuantConstant => match (&piece.grid, options.tempo) {
                    (Some(grid), _) => Some(Perturbation::constant_from_grid(grid)),
                    (None, Some(bpm)) => Perturbation::constant_from_tempo(bpm).ok(),
                    (None, None) => None,
                },
                Condition::Quant => piece.grid.clone().map(Perturbation::Quant),
                Condition::Noisy(ms) => Some(Perturbation::Noisy {
                    half_width: f64::from(ms) / 1000.0,
                }),
            };
            let Some(perturbation) = perturbation else {
                missing.push(piece.name.clone());
                continue;
            };
            let seeds: &[u64] = match condition {
                Condition::Noisy(_) => &options.seeds,
                _ => &[0],
            };
            for &seed in seeds {
                let mut rng = ChaCha8Rng::seed_from_u64(row_seed(seed ^ condition_tag(condition), index));
                let output = perturb(&piece.notes, &perturbation, &mut rng);
                values.push(rhythm_features(&piece.notes, &output, &options.config));
            }
        }
        if !missing.is_empty() {
            notices.push(format!(
                "{}: skipped {} piece(s) without a beat grid: {}",
                condition.name(),
                missing.len(),
                missing.join(", ")
            ));
        }
        conditions.push(summarise(condition.name(), values));
    }
    RhythmReport { conditions, notices }
}

fn fmt_cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.3}"))
}

impl RhythmReport {
    pub fn condition(&self, name: &str) -> Option<&ConditionReport> {
        self.conditions.iter().find(|c| c.condition == name)
    }

    /// Features as rows, conditions as mean/std column pairs.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "| Feature |");
        for c in &self.conditions {
            let _ = write!(out, " {} mean | {} std |", c.condition, c.condition);
        }
        out.push('\n');
        out.push_str("|---|");
        for _ in &self.conditions {
            out.push_str("---:|---:|");
        }
        out.push('\n');
        for (f, name) in RHYTHM_FEATURES.iter().enumerate() {
            let _ = write!(out, "| {name} |");
            for c in &self.conditions {
                let _ = write!(out, " {} | {} |", fmt_cell(c.mean[f]), fmt_cell(c.std[f]));
            }
            out.push('\n');
        }
        let _ = write!(out, "| samples |");
        for c in &self.conditions {
            let _ = write!(out, " {} | |", c.samples);
        }
        out.push('\n');
        for notice in &self.notices {
            let _ = writeln!(out, "\nnote: {notice}");
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "features": RHYTHM_FEATURES,
            "conditions": self.conditions,
            "notices": self.notices,
        })
    }
}

fn is_note_file(path: &Path) -> bool {
    matches!(
        path.extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref(),
        Some("mid" | "midi" | "txt" | "csv")
    )
}

/// Load every note file of a directory, sorted by file name. Grids are read
/// from `<grids>/<stem>.grid` when a grid directory is given.
pub fn load_corpus(dir: &Path, grids: Option<&Path>) -> Result<(Vec<RhythmPiece>, Vec<String>)> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_note_file(p))
        .collect();
    paths.sort();
    let mut pieces = Vec::new();
    let mut warnings = Vec::new();
    for path in paths {
        let ingested = match load_notes(&path, Role::Target) {
            Ok(i) => i,
            Err(_) => load_notes(&path, Role::Output)?,
        };
        warnings.extend(ingested.warnings);
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        let grid = match grids {
            Some(g) => {
                let grid_path = g.join(format!("{stem}.grid"));
                if grid_path.exists() {
                    Some(BeatGrid::load(&grid_path)?)
                } else {
                    None
                }
            }
            None => None,
        };
        pieces.push(RhythmPiece {
            name: stem,
            notes: ingested.notes,
            grid,
        });
    }
    Ok((pieces, warnings))
}
