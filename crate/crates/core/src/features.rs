//! The fixed feature schema and its JSON/CSV encodings.

use serde::Serialize;
use serde_json::{Map, Value};

pub const SCHEMA_VERSION: u32 = 1;

/// Whether larger values indicate a better transcription.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    #[serde(rename = "yes")]
    HigherIsBetter,
    #[serde(rename = "no")]
    LowerIsBetter,
    /// Depends on the material.
    #[serde(rename = "/")]
    Ambivalent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureSpec {
    pub key: &'static str,
    pub group: &'static str,
    pub direction: Direction,
    pub description: &'static str,
}

const fn spec(key: &'static str, group: &'static str, direction: Direction, description: &'static str) -> FeatureSpec {
    FeatureSpec {
        key,
        group,
        direction,
        description,
    }
}

use Direction::{Ambivalent as A, HigherIsBetter as Y, LowerIsBetter as N};

/// Every emitted feature, in output order.
pub const SCHEMA: &[FeatureSpec] = &[
    spec("framewise_precision", "benchmark_framewise", Y, "frame precision"),
    spec("framewise_recall", "benchmark_framewise", Y, "frame recall"),
    spec("framewise_f_measure", "benchmark_framewise", Y, "frame F-measure"),
    spec("onset_precision", "benchmark_onset", Y, "onset-only note precision"),
    spec("onset_recall", "benchmark_onset", Y, "onset-only note recall"),
    spec("onset_f_measure", "benchmark_onset", Y, "onset-only note F-measure"),
    spec(
        "onset_offset_precision",
        "benchmark_onset_offset",
        Y,
        "onset-offset note precision",
    ),
    spec(
        "onset_offset_recall",
        "benchmark_onset_offset",
        Y,
        "onset-offset note recall",
    ),
    spec(
        "onset_offset_f_measure",
        "benchmark_onset_offset",
        Y,
        "onset-offset note F-measure",
    ),
    spec(
        "highest_voice_framewise_precision",
        "highest_voice_framewise",
        Y,
        "highest-voice frame precision",
    ),
    spec(
        "highest_voice_framewise_recall",
        "highest_voice_framewise",
        Y,
        "highest-voice frame recall",
    ),
    spec(
        "highest_voice_framewise_f_measure",
        "highest_voice_framewise",
        Y,
        "highest-voice frame F-measure",
    ),
    spec(
        "lowest_voice_framewise_precision",
        "lowest_voice_framewise",
        Y,
        "lowest-voice frame precision",
    ),
    spec(
        "lowest_voice_framewise_recall",
        "lowest_voice_framewise",
        Y,
        "lowest-voice frame recall",
    ),
    spec(
        "lowest_voice_framewise_f_measure",
        "lowest_voice_framewise",
        Y,
        "lowest-voice frame F-measure",
    ),
    spec(
        "highest_voice_notewise_precision",
        "highest_voice_notewise",
        Y,
        "highest-voice note precision",
    ),
    spec(
        "highest_voice_notewise_recall",
        "highest_voice_notewise",
        Y,
        "highest-voice note recall",
    ),
    spec(
        "highest_voice_notewise_f_measure",
        "highest_voice_notewise",
        Y,
        "highest-voice note F-measure",
    ),
    spec(
        "lowest_voice_notewise_precision",
        "lowest_voice_notewise",
        Y,
        "lowest-voice note precision",
    ),
    spec(
        "lowest_voice_notewise_recall",
        "lowest_voice_notewise",
        Y,
        "lowest-voice note recall",
    ),
    spec(
        "lowest_voice_notewise_f_measure",
        "lowest_voice_notewise",
        Y,
        "lowest-voice note F-measure",
    ),
    spec(
        "loudness_normalized_fn",
        "loudness",
        N,
        "mean velocity of missed notes relative to their 2 s neighbourhood; null without misses",
    ),
    spec(
        "loudness_fn_ratio",
        "loudness",
        N,
        "mean ratio of missed velocity to the loudest decayed velocity around it; null without misses",
    ),
    spec(
        "out_of_key_binary_fp_ratio",
        "out_of_key_binary",
        N,
        "out-of-key false positives over false positives; null without false positives",
    ),
    spec(
        "out_of_key_binary_output_ratio",
        "out_of_key_binary",
        N,
        "out-of-key false positives over output notes",
    ),
    spec(
        "out_of_key_nonbinary_fp_mean",
        "out_of_key_nonbinary",
        N,
        "mean key disagreement of false positives; null without false positives",
    ),
    spec(
        "out_of_key_nonbinary_normalized",
        "out_of_key_nonbinary",
        N,
        "false-positive key disagreement over that of all output notes; null without false positives",
    ),
    spec(
        "framewise_semitone_fp_ratio",
        "framewise_semitone",
        A,
        "semitone error cells over false-positive cells; null without false positives",
    ),
    spec(
        "framewise_semitone_frame_ratio",
        "framewise_semitone",
        A,
        "semitone error cells over frames",
    ),
    spec(
        "framewise_octave_fp_ratio",
        "framewise_octave",
        A,
        "octave error cells over false-positive cells; null without false positives",
    ),
    spec(
        "framewise_octave_frame_ratio",
        "framewise_octave",
        A,
        "octave error cells over frames",
    ),
    spec(
        "framewise_third_harmonic_fp_ratio",
        "framewise_third_harmonic",
        A,
        "19-semitone error cells over false-positive cells; null without false positives",
    ),
    spec(
        "framewise_third_harmonic_frame_ratio",
        "framewise_third_harmonic",
        A,
        "19-semitone error cells over frames",
    ),
    spec(
        "notewise_semitone_fp_ratio",
        "notewise_semitone",
        A,
        "semitone error notes over false positives; null without false positives",
    ),
    spec(
        "notewise_semitone_output_ratio",
        "notewise_semitone",
        A,
        "semitone error notes over output notes",
    ),
    spec(
        "notewise_octave_fp_ratio",
        "notewise_octave",
        A,
        "octave error notes over false positives; null without false positives",
    ),
    spec(
        "notewise_octave_output_ratio",
        "notewise_octave",
        A,
        "octave error notes over output notes",
    ),
    spec(
        "notewise_third_harmonic_fp_ratio",
        "notewise_third_harmonic",
        A,
        "19-semitone error notes over false positives; null without false positives",
    ),
    spec(
        "notewise_third_harmonic_output_ratio",
        "notewise_third_harmonic",
        A,
        "19-semitone error notes over output notes",
    ),
    spec(
        "repeated_fp_ratio",
        "repeated_notes",
        A,
        "fragmenting false positives over false positives; null without false positives",
    ),
    spec(
        "repeated_output_ratio",
        "repeated_notes",
        A,
        "fragmenting false positives over output notes",
    ),
    spec(
        "merged_fn_ratio",
        "merged_notes",
        A,
        "merged-away targets over false negatives; null without false negatives",
    ),
    spec(
        "merged_target_ratio",
        "merged_notes",
        A,
        "merged-away targets over target notes",
    ),
    spec(
        "rhythm_flatness_output",
        "rhythm_flatness",
        A,
        "spectral flatness of the output IOI histogram",
    ),
    spec(
        "rhythm_flatness_difference",
        "rhythm_flatness",
        A,
        "output minus target spectral flatness",
    ),
    spec(
        "rhythm_drift_mean",
        "rhythm_dispersion",
        N,
        "mean IOI cluster centre drift in seconds; null without comparable clusters",
    ),
    spec(
        "rhythm_drift_min",
        "rhythm_dispersion",
        N,
        "minimum IOI cluster centre drift",
    ),
    spec(
        "rhythm_drift_max",
        "rhythm_dispersion",
        N,
        "maximum IOI cluster centre drift",
    ),
    spec(
        "rhythm_std_change_mean",
        "rhythm_dispersion",
        A,
        "mean change of IOI cluster standard deviation in seconds",
    ),
    spec(
        "rhythm_std_change_min",
        "rhythm_dispersion",
        A,
        "minimum change of IOI cluster standard deviation",
    ),
    spec(
        "rhythm_std_change_max",
        "rhythm_dispersion",
        A,
        "maximum change of IOI cluster standard deviation",
    ),
    spec(
        "roughness_mean",
        "consonance_roughness",
        A,
        "duration-weighted mean roughness of the output; null when silent",
    ),
    spec(
        "roughness_std",
        "consonance_roughness",
        A,
        "duration-weighted standard deviation of roughness",
    ),
    spec("roughness_min", "consonance_roughness", A, "minimum roughness"),
    spec("roughness_max", "consonance_roughness", A, "maximum roughness"),
    spec(
        "harmonicity_mean",
        "consonance_harmonicity",
        A,
        "duration-weighted mean harmonicity of the output; null when silent",
    ),
    spec(
        "harmonicity_std",
        "consonance_harmonicity",
        A,
        "duration-weighted standard deviation of harmonicity",
    ),
    spec("harmonicity_min", "consonance_harmonicity", A, "minimum harmonicity"),
    spec("harmonicity_max", "consonance_harmonicity", A, "maximum harmonicity"),
    spec(
        "familiarity_mean",
        "consonance_familiarity",
        A,
        "duration-weighted mean chord familiarity; null when silent or without a chord table",
    ),
    spec(
        "familiarity_std",
        "consonance_familiarity",
        A,
        "duration-weighted standard deviation of familiarity",
    ),
    spec("familiarity_min", "consonance_familiarity", A, "minimum familiarity"),
    spec("familiarity_max", "consonance_familiarity", A, "maximum familiarity"),
    spec(
        "polyphony_diff_mean",
        "polyphony",
        N,
        "mean absolute per-frame polyphony difference",
    ),
    spec(
        "polyphony_diff_std",
        "polyphony",
        N,
        "standard deviation of the polyphony difference",
    ),
    spec("polyphony_diff_min", "polyphony", N, "minimum polyphony difference"),
    spec("polyphony_diff_max", "polyphony", N, "maximum polyphony difference"),
];

pub fn schema_keys() -> impl Iterator<Item = &'static str> {
    SCHEMA.iter().map(|s| s.key)
}

fn index_of(key: &str) -> Option<usize> {
    SCHEMA.iter().position(|s| s.key == key)
}

/// Values for every schema key, plus free-form metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<Option<f64>>,
    pub metadata: Map<String, Value>,
    pub warnings: Vec<String>,
}

impl Default for FeatureVector {
    fn default() -> Self {
        FeatureVector {
            values: vec![None; SCHEMA.len()],
            metadata: Map::new(),
            warnings: Vec::new(),
        }
    }
}

impl FeatureVector {
    /// Value of a feature; `None` for unknown keys and absent values.
    pub fn get(&self, key: &str) -> Option<f64> {
        index_of(key).and_then(|i| self.values[i])
    }

    /// Panics on a key outside the schema.
    pub fn set(&mut self, key: &str, value: Option<f64>) {
        let i = index_of(key).unwrap_or_else(|| panic!("unknown feature `{key}`"));
        self.values[i] = value;
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static FeatureSpec, Option<f64>)> + '_ {
        SCHEMA.iter().zip(self.values.iter().copied())
    }

    pub fn features_json(&self) -> Value {
        let mut map = Map::new();
        for (spec, value) in self.iter() {
            map.insert(spec.key.to_string(), value.map_or(Value::Null, Value::from));
        }
        Value::Object(map)
    }

    /// `{schema_version, features, metadata}`, with `null` for absent values.
    pub fn to_json(&self) -> Value {
        let mut metadata = self.metadata.clone();
        metadata.insert("warnings".into(), Value::from(self.warnings.clone()));
        serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "features": self.features_json(),
            "metadata": metadata,
        })
    }

    /// Values formatted for CSV: shortest round-trip decimal, empty if absent.
    pub fn csv_values(&self) -> Vec<String> {
        self.values
            .iter()
            .map(|v| v.map(|x| x.to_string()).unwrap_or_default())
            .collect()
    }
}

/// Schema as JSON, for publishing alongside results.
pub fn schema_json() -> Value {
    Value::Array(
        SCHEMA
            .iter()
            .map(|s| {
                serde_json::json!({
                    "key": s.key,
                    "group": s.group,
                    "higher_is_better": s.direction,
                    "description": s.description,
                })
            })
            .collect(),
    )
}
