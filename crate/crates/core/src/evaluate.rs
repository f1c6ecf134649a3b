//! Pair and batch evaluation.
//!
//! Frame-based metrics share one frame count covering both lists after
//! sustain. Pedal handling follows the metric: voices and the key profile
//! use the notes as played, everything else uses the sounding notes with
//! the sustain pedal applied to both sides.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{Map, Value};

use crate::benchmark::{counts_from_matching, framewise_counts, PrfResult};
use crate::config::EvalConfig;
use crate::confusions::{self, PitchError};
use crate::consonance::{self, ChordTable, ConsonanceModel};
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::ingest::{load_notes, Ingested};
use crate::matching::{max_match_with, Criterion, Matching};
use crate::model::{apply_sustain_with_threshold, frame_count, Note, NoteList, PedalMode, PianoRoll, Role};
use crate::rhythm;
use crate::salience;
use crate::stats::Summary;
use crate::voice::{self, Voice};

/// Derived representations shared by all metric families.
#[derive(Debug, Clone)]
pub struct PreparedPair {
    pub target: NoteList,
    pub output: NoteList,
    /// Notes with offsets extended by the sustain pedal, in list order.
    pub target_sustained: Vec<Note>,
    pub output_sustained: Vec<Note>,
    pub frames: usize,
    pub target_roll: PianoRoll,
    pub output_roll: PianoRoll,
    pub target_roll_dry: PianoRoll,
    pub output_roll_dry: PianoRoll,
    pub onset_matching: Matching,
    pub onset_offset_matching: Matching,
    /// Onset-only matching of the notes without sustain.
    pub dry_onset_matching: Matching,
}

impl PreparedPair {
    pub fn new(target: &NoteList, output: &NoteList, cfg: &EvalConfig) -> Self {
        let target_sustained = apply_sustain_with_threshold(target, cfg.pedal_threshold)
            .notes()
            .to_vec();
        let output_sustained = apply_sustain_with_threshold(output, cfg.pedal_threshold)
            .notes()
            .to_vec();
        let end = target_sustained
            .iter()
            .chain(&output_sustained)
            .map(Note::offset)
            .fold(0.0, f64::max);
        let frames = frame_count(end);
        let tol = cfg.tolerance();
        PreparedPair {
            target_roll: PianoRoll::from_sounding(&target_sustained, PedalMode::WithPedal, frames),
            output_roll: PianoRoll::from_sounding(&output_sustained, PedalMode::WithPedal, frames),
            target_roll_dry: PianoRoll::from_sounding(target.notes(), PedalMode::WithoutPedal, frames),
            output_roll_dry: PianoRoll::from_sounding(output.notes(), PedalMode::WithoutPedal, frames),
            onset_matching: max_match_with(&target_sustained, &output_sustained, Criterion::OnsetOnly, &tol),
            onset_offset_matching: max_match_with(&target_sustained, &output_sustained, Criterion::OnsetOffset, &tol),
            dry_onset_matching: max_match_with(target.notes(), output.notes(), Criterion::OnsetOnly, &tol),
            target: target.clone(),
            output: output.clone(),
            target_sustained,
            output_sustained,
            frames,
        }
    }
}

fn set_prf(fv: &mut FeatureVector, prefix: &str, r: PrfResult) {
    fv.set(&format!("{prefix}_precision"), Some(r.precision));
    fv.set(&format!("{prefix}_recall"), Some(r.recall));
    fv.set(&format!("{prefix}_f_measure"), Some(r.f_measure));
}

fn set_summary(fv: &mut FeatureVector, prefix: &str, s: Option<Summary>, stats: [&str; 4]) {
    let values = [s.map(|s| s.mean), s.map(|s| s.std), s.map(|s| s.min), s.map(|s| s.max)];
    for (name, v) in stats.iter().zip(values) {
        if !name.is_empty() {
            fv.set(&format!("{prefix}_{name}"), v);
        }
    }
}

fn error_prefix(kind: PitchError) -> &'static str {
    match kind {
        PitchError::Semitone => "semitone",
        PitchError::Octave => "octave",
        PitchError::Nineteenth => "third_harmonic",
    }
}

/// Evaluates pairs under one configuration, memoising consonance values.
pub struct Evaluator {
    cfg: EvalConfig,
    consonance: ConsonanceModel,
}

impl Evaluator {
    pub fn new(cfg: EvalConfig, table: Option<ChordTable>) -> Self {
        Evaluator {
            cfg,
            consonance: ConsonanceModel::new(table),
        }
    }

    pub fn config(&self) -> &EvalConfig {
        &self.cfg
    }

    pub fn evaluate(&self, target: &NoteList, output: &NoteList) -> Result<FeatureVector> {
        let pair = PreparedPair::new(target, output, &self.cfg);
        self.evaluate_prepared(&pair)
    }

    pub fn evaluate_prepared(&self, pair: &PreparedPair) -> Result<FeatureVector> {
        let cfg = &self.cfg;
        let mut fv = FeatureVector::default();
        let (tn, on) = (&pair.target_sustained[..], &pair.output_sustained[..]);
        let m = &pair.onset_matching;

        set_prf(
            &mut fv,
            "framewise",
            framewise_counts(&pair.target_roll, &pair.output_roll)?.prf(),
        );
        set_prf(&mut fv, "onset", counts_from_matching(m).prf());
        set_prf(
            &mut fv,
            "onset_offset",
            counts_from_matching(&pair.onset_offset_matching).prf(),
        );

        for (which, name) in [(Voice::Highest, "highest"), (Voice::Lowest, "lowest")] {
            let frames = voice::voice_framewise_counts(&pair.target_roll_dry, &pair.output_roll_dry, which)?;
            set_prf(&mut fv, &format!("{name}_voice_framewise"), frames.prf());
            let notes = voice::voice_notewise_counts(
                pair.target.notes(),
                pair.output.notes(),
                &pair.dry_onset_matching,
                which,
                cfg.voice_min_dominance,
            );
            set_prf(&mut fv, &format!("{name}_voice_notewise"), notes.prf());
        }

        if tn.iter().all(|n| n.velocity().is_some()) {
            fv.set(
                "loudness_normalized_fn",
                salience::normalized_fn_loudness(tn, m, cfg.loudness_window)?,
            );
            fv.set(
                "loudness_fn_ratio",
                salience::fn_loudness_ratio(tn, m, cfg.ratio_window, &cfg.decay())?,
            );
        } else {
            fv.warnings
                .push("target notes lack velocities; loudness features are absent".into());
        }

        let profile = salience::build_pitch_profile(&pair.target_roll_dry, cfg.profile_threshold);
        let (binary_all, binary_fp) = salience::out_of_key_binary(on, m, &profile);
        fv.set("out_of_key_binary_output_ratio", Some(binary_all));
        fv.set("out_of_key_binary_fp_ratio", binary_fp);
        let (normalized, mean_fp) = salience::out_of_key_nonbinary(on, m, &profile);
        fv.set("out_of_key_nonbinary_normalized", normalized);
        fv.set("out_of_key_nonbinary_fp_mean", mean_fp);

        for kind in PitchError::ALL {
            let name = error_prefix(kind);
            let (frames, fps) =
                confusions::specific_pitch_framewise(&pair.target_roll, &pair.output_roll, kind, cfg.lookback_frames)?;
            fv.set(&format!("framewise_{name}_frame_ratio"), Some(frames));
            fv.set(&format!("framewise_{name}_fp_ratio"), fps);
            let (all, fps) = confusions::specific_pitch_notewise(tn, on, m, kind, cfg.overlap_threshold);
            fv.set(&format!("notewise_{name}_output_ratio"), Some(all));
            fv.set(&format!("notewise_{name}_fp_ratio"), fps);
        }
        let (fp, all) = confusions::repeated_notes(tn, on, m, cfg.overlap_threshold);
        fv.set("repeated_fp_ratio", fp);
        fv.set("repeated_output_ratio", Some(all));
        let (fn_, all) = confusions::merged_notes(tn, on, m, cfg.overlap_threshold);
        fv.set("merged_fn_ratio", fn_);
        fv.set("merged_target_ratio", Some(all));

        let (flat_out, flat_diff) = rhythm::flatness_features(
            pair.target.notes(),
            pair.output.notes(),
            &cfg.fine_bins(),
            cfg.flatness_epsilon,
        );
        fv.set("rhythm_flatness_output", Some(flat_out));
        fv.set("rhythm_flatness_difference", Some(flat_diff));
        let dispersion = rhythm::rhythm_dispersion(pair.target.notes(), pair.output.notes(), &cfg.dispersion());
        set_summary(
            &mut fv,
            "rhythm_drift",
            dispersion.map(|d| d.drift),
            ["mean", "", "min", "max"],
        );
        set_summary(
            &mut fv,
            "rhythm_std_change",
            dispersion.map(|d| d.std_change),
            ["mean", "", "min", "max"],
        );

        let stats = ["mean", "std", "min", "max"];
        let cons = self.consonance.features(on);
        set_summary(&mut fv, "roughness", cons.map(|c| c.roughness), stats);
        set_summary(&mut fv, "harmonicity", cons.map(|c| c.harmonicity), stats);
        set_summary(&mut fv, "familiarity", cons.and_then(|c| c.familiarity), stats);
        if self.consonance.table().is_none() {
            fv.warnings
                .push("no chord table loaded; familiarity features are absent".into());
        }

        let poly = salience::polyphony_features(&pair.target_roll, &pair.output_roll)?;
        set_summary(&mut fv, "polyphony_diff", Some(poly), stats);

        fv.metadata = self.metadata(pair);
        Ok(fv)
    }

    fn metadata(&self, pair: &PreparedPair) -> Map<String, Value> {
        let mut meta = Map::new();
        meta.insert("seed".into(), Value::from(self.cfg.seed));
        meta.insert("target_notes".into(), Value::from(pair.target.len()));
        meta.insert("output_notes".into(), Value::from(pair.output.len()));
        meta.insert("frames".into(), Value::from(pair.frames));
        meta.insert(
            "chord_table_total".into(),
            self.consonance.table().map_or(Value::Null, |t| Value::from(t.total())),
        );
        meta.insert("consonance_model".into(), consonance::model_metadata());
        meta.insert(
            "config".into(),
            serde_json::to_value(&self.cfg).expect("config serialises"),
        );
        meta
    }
}

/// Evaluate one pair. `table` supplies chord-type counts for familiarity.
pub fn evaluate_pair(
    target: &NoteList,
    output: &NoteList,
    cfg: &EvalConfig,
    table: Option<&ChordTable>,
) -> Result<FeatureVector> {
    Evaluator::new(cfg.clone(), table.cloned()).evaluate(target, output)
}

/// Load a target file. A text file without velocity columns is accepted
/// with a warning; loudness features then come out absent.
pub fn load_target(path: &Path) -> Result<Ingested> {
    match load_notes(path, Role::Target) {
        Ok(ingested) => Ok(ingested),
        Err(e) => match load_notes(path, Role::Output) {
            Ok(mut ingested) if ingested.notes.notes().iter().any(|n| n.velocity().is_none()) => {
                ingested
                    .warnings
                    .push(format!("{}: target has no velocities", path.display()));
                Ok(ingested)
            }
            _ => Err(e),
        },
    }
}

/// Load both files of a pair and evaluate them.
pub fn evaluate_files(evaluator: &Evaluator, target: &Path, output: &Path) -> Result<FeatureVector> {
    let t = load_target(target)?;
    let o = load_notes(output, Role::Output)?;
    let mut fv = evaluator.evaluate(&t.notes, &o.notes)?;
    let mut warnings = t.warnings;
    warnings.extend(o.warnings);
    warnings.append(&mut fv.warnings);
    fv.warnings = warnings;
    fv.metadata
        .insert("target_path".into(), Value::from(target.display().to_string()));
    fv.metadata
        .insert("output_path".into(), Value::from(output.display().to_string()));
    Ok(fv)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub pair_id: String,
    pub target: PathBuf,
    pub output: PathBuf,
}

/// Parse manifest CSV text (`target_path,output_path,pair_id`, header
/// optional). Relative paths resolve against `base`. Malformed rows are
/// returned as errors in place.
pub fn parse_manifest(text: &str, base: &Path) -> Vec<std::result::Result<ManifestRow, (String, String)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let fallback_id = format!("row{}", i + 1);
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                rows.push(Err((fallback_id, e.to_string())));
                continue;
            }
        };
        if i == 0 && record.get(0) == Some("target_path") {
            continue;
        }
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != 3 {
            rows.push(Err((fallback_id, format!("expected 3 fields, found {}", record.len()))));
            continue;
        }
        rows.push(Ok(ManifestRow {
            pair_id: record[2].to_string(),
            target: base.join(&record[0]),
            output: base.join(&record[1]),
        }));
    }
    rows
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchRow {
    pub pair_id: String,
    pub result: std::result::Result<FeatureVector, String>,
}

impl BatchRow {
    pub fn is_ok(&self) -> bool {
        self.result.is_ok()
    }
}

/// Per-row seed derived from the base seed and the row index.
pub fn row_seed(base: u64, index: usize) -> u64 {
    // splitmix64 finaliser
    let mut z = base.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Evaluate every manifest row in parallel. Rows come back in manifest
/// order; a failing row carries its error instead of aborting the batch.
pub fn evaluate_batch(manifest: &Path, cfg: &EvalConfig, table: Option<&ChordTable>) -> Result<Vec<BatchRow>> {
    let text = std::fs::read_to_string(manifest).map_err(|e| Error::io(manifest, e))?;
    let base = manifest.parent().unwrap_or(Path::new(""));
    let rows = parse_manifest(&text, base);
    if rows.is_empty() {
        return Err(Error::Manifest(format!("{}: no rows", manifest.display())));
    }
    let evaluator = Evaluator::new(cfg.clone(), table.cloned());
    Ok(rows
        .into_par_iter()
        .enumerate()
        .map(|(index, row)| match row {
            Err((pair_id, message)) => BatchRow {
                pair_id,
                result: Err(message),
            },
            Ok(row) => {
                let result = evaluate_files(&evaluator, &row.target, &row.output)
                    .map(|mut fv| {
                        fv.metadata.insert("pair_id".into(), Value::from(row.pair_id.clone()));
                        fv.metadata
                            .insert("row_seed".into(), Value::from(row_seed(cfg.seed, index)));
                        fv
                    })
                    .map_err(|e| e.to_string());
                BatchRow {
                    pair_id: row.pair_id,
                    result,
                }
            }
        })
        .collect())
}

/// CSV table: `pair_id,status,error`, then one column per feature.
pub fn batch_csv(rows: &[BatchRow]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["pair_id".to_string(), "status".into(), "error".into()];
    header.extend(crate::features::schema_keys().map(String::from));
    writer.write_record(&header).expect("in-memory write");
    for row in rows {
        let mut record = vec![row.pair_id.clone()];
        match &row.result {
            Ok(fv) => {
                record.push("ok".into());
                record.push(String::new());
                record.extend(fv.csv_values());
            }
            Err(e) => {
                record.push("error".into());
                record.push(e.clone());
                record.extend(std::iter::repeat_n(String::new(), crate::features::SCHEMA.len()));
            }
        }
        writer.write_record(&record).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

/// One JSON object per line.
pub fn batch_jsonl(rows: &[BatchRow]) -> String {
    let mut out = String::new();
    for row in rows {
        let value = match &row.result {
            Ok(fv) => {
                let mut v = fv.to_json();
                v["pair_id"] = Value::from(row.pair_id.clone());
                v["status"] = Value::from("ok");
                v
            }
            Err(e) => serde_json::json!({
                "pair_id": row.pair_id,
                "status": "error",
                "error": e,
            }),
        };
        out.push_str(&value.to_string());
        out.push('\n');
    }
    out
}
