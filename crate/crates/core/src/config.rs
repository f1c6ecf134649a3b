//! Tunable parameters, with defaults matching the published definitions.
//!
//! A config file holds `key = value` lines; `#` starts a comment. Keys match
//! the field names of [`EvalConfig`]; bin edges are comma-separated
//! milliseconds.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matching::Tolerance;
use crate::rhythm::{Bins, DispersionConfig};
use crate::salience::DecayModel;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalConfig {
    pub onset_tolerance: f64,
    pub offset_ratio: f64,
    pub offset_floor: f64,
    pub pedal_threshold: u8,
    /// Minimum uncovered stretch for a note to belong to a voice (d_H).
    pub voice_min_dominance: f64,
    /// Half-width of the loudness normalisation window (d_L).
    pub loudness_window: f64,
    /// Half-width of the loudness-ratio search window (d_R).
    pub ratio_window: f64,
    pub decay_intercept: f64,
    pub decay_slope: f64,
    pub decay_horizon: f64,
    pub profile_threshold: f64,
    pub lookback_frames: usize,
    pub overlap_threshold: f64,
    pub fine_bins_ms: Vec<u32>,
    pub coarse_bins_ms: Vec<u32>,
    pub flatness_epsilon: f64,
    pub kmeans_tolerance: f64,
    pub kmeans_max_iterations: usize,
    /// Recorded in the output metadata; evaluation itself is deterministic.
    pub seed: u64,
}

fn millis(bins: &Bins) -> Vec<u32> {
    bins.edges().iter().map(|e| (e * 1000.0).round() as u32).collect()
}

impl Default for EvalConfig {
    fn default() -> Self {
        let tol = Tolerance::default();
        let decay = DecayModel::default();
        EvalConfig {
            onset_tolerance: tol.onset,
            offset_ratio: tol.offset_ratio,
            offset_floor: tol.offset_floor,
            pedal_threshold: crate::model::PEDAL_DOWN_THRESHOLD,
            voice_min_dominance: crate::voice::DEFAULT_MIN_DOMINANCE,
            loudness_window: crate::salience::DEFAULT_LOUDNESS_WINDOW,
            ratio_window: crate::salience::DEFAULT_RATIO_WINDOW,
            decay_intercept: decay.intercept,
            decay_slope: decay.slope,
            decay_horizon: decay.horizon,
            profile_threshold: crate::salience::DEFAULT_PROFILE_THRESHOLD,
            lookback_frames: crate::confusions::DEFAULT_LOOKBACK_FRAMES,
            overlap_threshold: crate::confusions::DEFAULT_OVERLAP_THRESHOLD,
            fine_bins_ms: millis(&Bins::fine()),
            coarse_bins_ms: millis(&Bins::coarse()),
            flatness_epsilon: crate::rhythm::FLATNESS_EPSILON,
            kmeans_tolerance: crate::rhythm::KMEANS_TOLERANCE,
            kmeans_max_iterations: crate::rhythm::KMEANS_MAX_ITERATIONS,
            seed: 0,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("{key}: cannot parse `{value}`")))
}

fn parse_edges(key: &str, value: &str) -> Result<Vec<u32>> {
    let edges = value
        .split(',')
        .map(|v| parse_value(key, v.trim()))
        .collect::<Result<Vec<u32>>>()?;
    Bins::from_millis(&edges)
        .ok_or_else(|| Error::InvalidParameter(format!("{key}: need two or more increasing edges")))?;
    Ok(edges)
}

impl EvalConfig {
    /// Set one parameter from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "onset_tolerance" => self.onset_tolerance = parse_value(key, value)?,
            "offset_ratio" => self.offset_ratio = parse_value(key, value)?,
            "offset_floor" => self.offset_floor = parse_value(key, value)?,
            "pedal_threshold" => self.pedal_threshold = parse_value(key, value)?,
            "voice_min_dominance" => self.voice_min_dominance = parse_value(key, value)?,
            "loudness_window" => self.loudness_window = parse_value(key, value)?,
            "ratio_window" => self.ratio_window = parse_value(key, value)?,
            "decay_intercept" => self.decay_intercept = parse_value(key, value)?,
            "decay_slope" => self.decay_slope = parse_value(key, value)?,
            "decay_horizon" => self.decay_horizon = parse_value(key, value)?,
            "profile_threshold" => self.profile_threshold = parse_value(key, value)?,
            "lookback_frames" => self.lookback_frames = parse_value(key, value)?,
            "overlap_threshold" => self.overlap_threshold = parse_value(key, value)?,
            "fine_bins_ms" => self.fine_bins_ms = parse_edges(key, value)?,
            "coarse_bins_ms" => self.coarse_bins_ms = parse_edges(key, value)?,
            "flatness_epsilon" => self.flatness_epsilon = parse_value(key, value)?,
            "kmeans_tolerance" => self.kmeans_tolerance = parse_value(key, value)?,
            "kmeans_max_iterations" => self.kmeans_max_iterations = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            other => return Err(Error::InvalidParameter(format!("unknown parameter `{other}`"))),
        }
        self.validate()
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            ("onset_tolerance", self.onset_tolerance),
            ("loudness_window", self.loudness_window),
            ("flatness_epsilon", self.flatness_epsilon),
            ("kmeans_tolerance", self.kmeans_tolerance),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{key} must be positive")));
            }
        }
        let non_negative = [
            ("offset_ratio", self.offset_ratio),
            ("offset_floor", self.offset_floor),
            ("voice_min_dominance", self.voice_min_dominance),
            ("ratio_window", self.ratio_window),
            ("decay_horizon", self.decay_horizon),
            ("profile_threshold", self.profile_threshold),
            ("overlap_threshold", self.overlap_threshold),
        ];
        for (key, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!("{key} must be non-negative")));
            }
        }
        if self.pedal_threshold > 127 {
            return Err(Error::InvalidParameter("pedal_threshold must be at most 127".into()));
        }
        Ok(())
    }

    /// Apply `key = value` lines on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Config { line: i + 1, message };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected `key = value`".into()))?;
            self.set(key, value).map_err(|e| match e {
                Error::InvalidParameter(m) => err(m),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = EvalConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        EvalConfig::parse(&text)
    }

    pub fn tolerance(&self) -> Tolerance {
        Tolerance {
            onset: self.onset_tolerance,
            offset_ratio: self.offset_ratio,
            offset_floor: self.offset_floor,
        }
    }

    pub fn decay(&self) -> DecayModel {
        DecayModel {
            intercept: self.decay_intercept,
            slope: self.decay_slope,
            horizon: self.decay_horizon,
        }
    }

    pub fn fine_bins(&self) -> Bins {
        Bins::from_millis(&self.fine_bins_ms).expect("validated edges")
    }

    pub fn dispersion(&self) -> DispersionConfig {
        DispersionConfig {
            bins: Bins::from_millis(&self.coarse_bins_ms).expect("validated edges"),
            tolerance: self.kmeans_tolerance,
            max_iterations: self.kmeans_max_iterations,
        }
    }
}
