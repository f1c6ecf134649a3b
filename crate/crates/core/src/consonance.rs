//! Consonance of the sounding chords: partial-interference roughness, a
//! pitch-class-spectrum harmonicity and corpus-based familiarity.
//!
//! Statistics are taken over event segments (one boundary per onset or
//! offset), weighted by segment duration; silent segments are skipped.
//!
//! The models are fixed, versioned formulations:
//!
//! * roughness: every tone expands into 11 harmonics with amplitude `1/n`,
//!   coincident partials add their amplitudes, and each pair of partials
//!   contributes `a_i a_j g(y)` with `y = |f_i - f_j| / (1.72 f̄^0.65)` and
//!   `g(y) = ((y / 0.25) exp(1 - y / 0.25))^2` for `y <= 1.2`, 0 beyond. The
//!   sum is normalised by `Σ a_i²`.
//! * harmonicity: a 1200-bin (one per cent) pitch-class spectrum where each
//!   tone contributes 12 harmonics weighted `n^-0.75`, smeared by a Gaussian
//!   of 6.83 cents. The value is the best cosine similarity between the chord
//!   spectrum and a rotated single harmonic-complex template.
//! * familiarity: Laplace-smoothed log relative frequency of the chord type
//!   (pitch classes relative to the bass) in a counts table.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Mutex, OnceLock};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Note;
use crate::stats::Summary;

pub const MODEL_VERSION: &str = "consonance-v1";

pub const ROUGHNESS_HARMONICS: usize = 11;
pub const CBW_COEFFICIENT: f64 = 1.72;
pub const CBW_EXPONENT: f64 = 0.65;
pub const KERNEL_CUTOFF: f64 = 1.2;
const KERNEL_PEAK: f64 = 0.25;

pub const SPECTRUM_BINS: usize = 1200;
pub const HARMONICITY_HARMONICS: usize = 12;
pub const HARMONICITY_ROLLOFF: f64 = 0.75;
pub const SMEAR_SIGMA_CENTS: f64 = 6.83;

/// Number of distinct bass-relative pitch-class sets (subsets of 1..=11
/// together with the bass).
pub const CHORD_TYPE_COUNT: u64 = 2048;

const COINCIDENCE_TOLERANCE: f64 = 1e-9;

pub fn midi_to_hz(pitch: f64) -> f64 {
    440.0 * 2f64.powf((pitch - 69.0) / 12.0)
}

/// Stretch of time with a constant set of sounding pitches.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventSegment {
    pub start: f64,
    pub end: f64,
    /// Distinct sounding MIDI pitches, ascending. Empty for silence.
    pub chord: Vec<u8>,
}

impl EventSegment {
    pub fn is_silent(&self) -> bool {
        self.chord.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Split the time line at every distinct onset and offset.
pub fn event_segments(notes: &[Note]) -> Vec<EventSegment> {
    let mut bounds: Vec<f64> = notes.iter().flat_map(|n| [n.onset(), n.offset()]).collect();
    bounds.sort_by(f64::total_cmp);
    bounds.dedup();
    if bounds.len() < 2 {
        return Vec::new();
    }
    let mut chords: Vec<Vec<u8>> = vec![Vec::new(); bounds.len() - 1];
    for n in notes {
        let first = bounds.partition_point(|&b| b < n.onset());
        let last = bounds.partition_point(|&b| b < n.offset());
        for chord in &mut chords[first..last] {
            chord.push(n.pitch());
        }
    }
    bounds
        .windows(2)
        .zip(chords)
        .map(|(w, mut chord)| {
            chord.sort_unstable();
            chord.dedup();
            EventSegment {
                start: w[0],
                end: w[1],
                chord,
            }
        })
        .collect()
}

/// Roughness kernel over critical-bandwidth distance.
pub fn interference_kernel(y: f64) -> f64 {
    if y > KERNEL_CUTOFF {
        return 0.0;
    }
    let r = y / KERNEL_PEAK;
    (r * (1.0 - r).exp()).powi(2)
}

pub fn critical_bandwidth(mean_frequency: f64) -> f64 {
    CBW_COEFFICIENT * mean_frequency.powf(CBW_EXPONENT)
}

/// Harmonic partials of tones at the given fundamentals, with coincident
/// partials merged by adding amplitudes. Sorted by frequency.
pub fn harmonic_partials(fundamentals: &[f64], harmonics: usize) -> Vec<(f64, f64)> {
    let mut partials: Vec<(f64, f64)> = fundamentals
        .iter()
        .flat_map(|&f0| (1..=harmonics).map(move |n| (f0 * n as f64, 1.0 / n as f64)))
        .collect();
    partials.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(partials.len());
    for (f, a) in partials {
        match merged.last_mut() {
            Some(last) if (f - last.0).abs() <= COINCIDENCE_TOLERANCE * f => last.1 += a,
            _ => merged.push((f, a)),
        }
    }
    merged
}

/// Roughness of a set of complex tones given by their fundamentals in Hz.
pub fn roughness_of_fundamentals(fundamentals: &[f64]) -> f64 {
    let partials = harmonic_partials(fundamentals, ROUGHNESS_HARMONICS);
    let energy: f64 = partials.iter().map(|p| p.1 * p.1).sum();
    if energy == 0.0 {
        return 0.0;
    }
    let mut total = 0.0;
    for (i, &(fi, ai)) in partials.iter().enumerate() {
        for &(fj, aj) in &partials[i + 1..] {
            let y = (fj - fi) / critical_bandwidth(0.5 * (fi + fj));
            if y > KERNEL_CUTOFF {
                // partials are sorted and the band grows slower than the gap
                break;
            }
            total += ai * aj * interference_kernel(y);
        }
    }
    total / energy
}

fn distinct(chord: &[u8]) -> Result<Vec<u8>> {
    if chord.is_empty() {
        return Err(Error::InvalidParameter("consonance of an empty chord".into()));
    }
    let mut pitches = chord.to_vec();
    pitches.sort_unstable();
    pitches.dedup();
    Ok(pitches)
}

/// Roughness of a chord of MIDI pitches (duplicates collapse).
pub fn roughness_hutch78(chord: &[u8]) -> Result<f64> {
    let pitches = distinct(chord)?;
    let f0: Vec<f64> = pitches.iter().map(|&p| midi_to_hz(f64::from(p))).collect();
    Ok(roughness_of_fundamentals(&f0))
}

struct SpectrumModel {
    template: Vec<f64>,
    autocorrelation: Vec<f64>,
}

fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(SPECTRUM_BINS as f64);
    d.min(SPECTRUM_BINS as f64 - d)
}

/// Smeared pitch-class spectrum of one harmonic complex tone whose
/// fundamental sits at `position` cents.
pub fn tone_spectrum(position: f64) -> Vec<f64> {
    let two_var = 2.0 * SMEAR_SIGMA_CENTS * SMEAR_SIGMA_CENTS;
    let partials: Vec<(f64, f64)> = (1..=HARMONICITY_HARMONICS)
        .map(|n| {
            let cents = position + 1200.0 * (n as f64).log2();
            (cents, (n as f64).powf(-HARMONICITY_ROLLOFF))
        })
        .collect();
    (0..SPECTRUM_BINS)
        .map(|b| {
            partials
                .iter()
                .map(|&(c, w)| w * (-circular_distance(b as f64, c).powi(2) / two_var).exp())
                .sum()
        })
        .collect()
}

fn spectrum_model() -> &'static SpectrumModel {
    static MODEL: OnceLock<SpectrumModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let template = tone_spectrum(0.0);
        let autocorrelation = (0..SPECTRUM_BINS)
            .map(|j| {
                (0..SPECTRUM_BINS)
                    .map(|b| template[b] * template[(b + SPECTRUM_BINS - j) % SPECTRUM_BINS])
                    .sum()
            })
            .collect();
        SpectrumModel {
            template,
            autocorrelation,
        }
    })
}

/// The single-tone template spectrum at pitch class 0.
pub fn harmonicity_template() -> &'static [f64] {
    &spectrum_model().template
}

/// Harmonicity from pitch-class multiplicities.
///
/// Each tone's spectrum is the template rotated by `100 * pc` bins, so every
/// inner product reduces to the template's circular autocorrelation.
fn harmonicity_of_counts(counts: &[u32; 12]) -> f64 {
    let model = spectrum_model();
    let r = |shift: i64| model.autocorrelation[shift.rem_euclid(SPECTRUM_BINS as i64) as usize];
    let tones: Vec<(i64, f64)> = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(pc, &c)| (100 * pc as i64, f64::from(c)))
        .collect();
    let mut norm_sq = 0.0;
    for &(a, ca) in &tones {
        for &(b, cb) in &tones {
            norm_sq += ca * cb * r(a - b);
        }
    }
    let denominator = norm_sq.sqrt() * r(0).sqrt();
    let best = (0..SPECTRUM_BINS as i64)
        .map(|k| tones.iter().map(|&(pos, c)| c * r(k - pos)).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    best / denominator
}

fn pitch_class_counts(pitches: &[u8]) -> [u32; 12] {
    let mut counts = [0u32; 12];
    for &p in pitches {
        counts[usize::from(p % 12)] += 1;
    }
    counts
}

pub fn harmonicity(chord: &[u8]) -> Result<f64> {
    let pitches = distinct(chord)?;
    Ok(harmonicity_of_counts(&pitch_class_counts(&pitches)))
}

/// Bass-relative pitch-class set, e.g. `0-4-7` for any root-position major
/// triad.
pub fn chord_type_id(chord: &[u8]) -> Result<String> {
    let pitches = distinct(chord)?;
    let bass = pitches[0] % 12;
    let mut classes: Vec<u8> = pitches.iter().map(|&p| (p % 12 + 12 - bass) % 12).collect();
    classes.sort_unstable();
    classes.dedup();
    Ok(classes.iter().map(u8::to_string).collect::<Vec<_>>().join("-"))
}

fn valid_type_id(id: &str) -> bool {
    let parts: Option<Vec<u8>> = id.split('-').map(|p| p.parse().ok()).collect();
    match parts {
        Some(pcs) => pcs.first() == Some(&0) && pcs.windows(2).all(|w| w[0] < w[1]) && pcs.iter().all(|&p| p < 12),
        None => false,
    }
}

/// Chord-type occurrence counts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChordTable {
    counts: HashMap<String, u64>,
    total: u64,
}

impl ChordTable {
    pub fn from_counts(counts: impl IntoIterator<Item = (String, u64)>) -> Self {
        let mut table = ChordTable::default();
        for (id, c) in counts {
            table.add(id, c);
        }
        table
    }

    fn add(&mut self, id: String, count: u64) {
        *self.counts.entry(id).or_insert(0) += count;
        self.total += count;
    }

    /// Parse `chord_type_id,count` CSV with that header line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, header)) if header.trim() == "chord_type_id,count" => {}
            Some((i, _)) => {
                return Err(Error::ChordTable {
                    line: i + 1,
                    message: "expected header `chord_type_id,count`".into(),
                })
            }
            None => {
                return Err(Error::ChordTable {
                    line: 1,
                    message: "empty table".into(),
                })
            }
        }
        let mut table = ChordTable::default();
        for (i, line) in lines {
            let err = |message: String| Error::ChordTable { line: i + 1, message };
            let (id, count) = line
                .trim()
                .split_once(',')
                .ok_or_else(|| err("expected two fields".into()))?;
            if !valid_type_id(id) {
                return Err(err(format!("invalid chord type `{id}`")));
            }
            let count: u64 = count.parse().map_err(|_| err(format!("invalid count `{count}`")))?;
            table.add(id.to_string(), count);
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ChordTable::parse(&text)
    }

    /// Count the chord types of every non-silent segment of each piece.
    pub fn from_pieces<'a>(pieces: impl IntoIterator<Item = &'a [Note]>) -> Self {
        let mut table = ChordTable::default();
        for notes in pieces {
            for seg in event_segments(notes) {
                if let Ok(id) = chord_type_id(&seg.chord) {
                    table.add(id, 1);
                }
            }
        }
        table
    }

    /// CSV text with rows sorted by descending count, then id.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<(&String, &u64)> = self.counts.iter().collect();
        rows.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
        let mut out = String::from("chord_type_id,count\n");
        for (id, count) in rows {
            out.push_str(&format!("{id},{count}\n"));
        }
        out
    }

    pub fn count(&self, id: &str) -> u64 {
        self.counts.get(id).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// `ln((count + 1) / (total + 2048))`.
    pub fn familiarity(&self, chord: &[u8]) -> Result<f64> {
        let id = chord_type_id(chord)?;
        Ok(((self.count(&id) + 1) as f64 / (self.total + CHORD_TYPE_COUNT) as f64).ln())
    }
}

/// Table shipped with the crate, counted from the bundled tonal corpus.
pub fn default_chord_table() -> ChordTable {
    ChordTable::parse(include_str!("../assets/chord_types.csv")).expect("bundled table is valid")
}

pub fn corpus_familiarity(chord: &[u8], table: &ChordTable) -> Result<f64> {
    table.familiarity(chord)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConsonanceFeatures {
    pub roughness: Summary,
    pub harmonicity: Summary,
    pub familiarity: Option<Summary>,
}

/// Evaluates consonance measures with per-chord memoisation.
#[derive(Default)]
pub struct ConsonanceModel {
    table: Option<ChordTable>,
    roughness_cache: Mutex<HashMap<Vec<u8>, f64>>,
    harmonicity_cache: Mutex<HashMap<[u32; 12], f64>>,
}

impl ConsonanceModel {
    pub fn new(table: Option<ChordTable>) -> Self {
        ConsonanceModel {
            table,
            ..Default::default()
        }
    }

    pub fn table(&self) -> Option<&ChordTable> {
        self.table.as_ref()
    }

    fn roughness(&self, chord: &[u8]) -> f64 {
        if let Some(&v) = self.roughness_cache.lock().expect("cache lock").get(chord) {
            return v;
        }
        let v = roughness_hutch78(chord).expect("non-empty chord");
        self.roughness_cache
            .lock()
            .expect("cache lock")
            .insert(chord.to_vec(), v);
        v
    }

    fn harmonicity(&self, chord: &[u8]) -> f64 {
        let key = pitch_class_counts(chord);
        if let Some(&v) = self.harmonicity_cache.lock().expect("cache lock").get(&key) {
            return v;
        }
        let v = harmonicity_of_counts(&key);
        self.harmonicity_cache.lock().expect("cache lock").insert(key, v);
        v
    }

    /// Duration-weighted mean and std plus min and max of each measure over
    /// the non-silent segments. `None` when everything is silent.
    pub fn features(&self, notes: &[Note]) -> Option<ConsonanceFeatures> {
        let segments: Vec<EventSegment> = event_segments(notes).into_iter().filter(|s| !s.is_silent()).collect();
        let weights: Vec<f64> = segments.iter().map(EventSegment::duration).collect();
        let rough: Vec<f64> = segments.iter().map(|s| self.roughness(&s.chord)).collect();
        let harm: Vec<f64> = segments.iter().map(|s| self.harmonicity(&s.chord)).collect();
        let familiarity = self.table.as_ref().and_then(|table| {
            let values: Vec<f64> = segments
                .iter()
                .map(|s| table.familiarity(&s.chord).expect("non-empty chord"))
                .collect();
            Summary::weighted(&values, &weights)
        });
        Some(ConsonanceFeatures {
            roughness: Summary::weighted(&rough, &weights)?,
            harmonicity: Summary::weighted(&harm, &weights)?,
            familiarity,
        })
    }
}

/// Constants recorded alongside every feature vector.
pub fn model_metadata() -> serde_json::Value {
    serde_json::json!({
        "version": MODEL_VERSION,
        "roughness": {
            "harmonics": ROUGHNESS_HARMONICS,
            "amplitude_rolloff": "1/n",
            "cbw_coefficient": CBW_COEFFICIENT,
            "cbw_exponent": CBW_EXPONENT,
            "kernel_cutoff": KERNEL_CUTOFF,
        },
        "harmonicity": {
            "bins": SPECTRUM_BINS,
            "harmonics": HARMONICITY_HARMONICS,
            "rolloff_exponent": HARMONICITY_ROLLOFF,
            "sigma_cents": SMEAR_SIGMA_CENTS,
        },
        "familiarity": {
            "smoothing": "laplace",
            "chord_types": CHORD_TYPE_COUNT,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(s: f64, e: f64, p: i64) -> Note {
        Note::new(s, e, p, None).unwrap()
    }

    #[test]
    fn segments() {
        let segs = event_segments(&[n(0.0, 1.0, 60)]);
        assert_eq!(
            segs,
            vec![EventSegment {
                start: 0.0,
                end: 1.0,
                chord: vec![60]
            }]
        );

        let segs = event_segments(&[n(0.0, 2.0, 60), n(1.0, 3.0, 64)]);
        let chords: Vec<_> = segs.iter().map(|s| (s.start, s.end, s.chord.clone())).collect();
        assert_eq!(
            chords,
            vec![(0.0, 1.0, vec![60]), (1.0, 2.0, vec![60, 64]), (2.0, 3.0, vec![64])]
        );

        let segs = event_segments(&[n(0.0, 1.0, 60), n(2.0, 3.0, 62)]);
        assert_eq!(segs.len(), 3);
        assert!(segs[1].is_silent());
        assert!(event_segments(&[]).is_empty());
    }

    #[test]
    fn kernel_shape() {
        assert_eq!(interference_kernel(0.0), 0.0);
        assert!((interference_kernel(0.25) - 1.0).abs() < 1e-12);
        assert_eq!(interference_kernel(1.21), 0.0);
        assert!(interference_kernel(1.2) > 0.0);
    }

    #[test]
    fn roughness_ordering_and_unison() {
        let semitone = roughness_hutch78(&[60, 61]).unwrap();
        let triad = roughness_hutch78(&[60, 64, 67]).unwrap();
        assert!(semitone > triad, "{semitone} vs {triad}");
        assert_eq!(roughness_hutch78(&[60, 60]).unwrap(), roughness_hutch78(&[60]).unwrap());
        assert!(roughness_hutch78(&[60]).unwrap() > 0.0);
        assert!(roughness_hutch78(&[]).is_err());
    }

    #[test]
    fn harmonicity_properties() {
        assert!((harmonicity(&[60]).unwrap() - 1.0).abs() < 1e-12);
        let triad = harmonicity(&[60, 64, 67]).unwrap();
        let cluster = harmonicity(&[60, 61, 62]).unwrap();
        assert!(triad > cluster, "{triad} vs {cluster}");
        assert!((triad - harmonicity(&[61, 65, 68]).unwrap()).abs() < 1e-12);
        assert!(harmonicity(&[]).is_err());
    }

    #[test]
    fn chord_types() {
        assert_eq!(chord_type_id(&[60, 64, 67]).unwrap(), "0-4-7");
        assert_eq!(chord_type_id(&[62, 66, 69]).unwrap(), "0-4-7");
        assert_eq!(chord_type_id(&[64, 67, 72]).unwrap(), "0-3-8");
        assert_eq!(chord_type_id(&[48, 60, 64]).unwrap(), "0-4");
        assert!(valid_type_id("0-4-7"));
        assert!(!valid_type_id("4-7"));
        assert!(!valid_type_id("0-7-4"));
        assert!(!valid_type_id("0-12"));
    }

    #[test]
    fn familiarity_smoothing() {
        let table = ChordTable::parse("chord_type_id,count\n0-4-7,9\n0-1-2,1\n").unwrap();
        let expected_triad = (10.0f64 / 2058.0).ln();
        let expected_cluster = (2.0f64 / 2058.0).ln();
        let expected_unseen = (1.0f64 / 2058.0).ln();
        assert!((table.familiarity(&[60, 64, 67]).unwrap() - expected_triad).abs() < 1e-12);
        assert!((table.familiarity(&[60, 61, 62]).unwrap() - expected_cluster).abs() < 1e-12);
        assert!((table.familiarity(&[60, 66]).unwrap() - expected_unseen).abs() < 1e-12);
        assert!(ChordTable::parse("id,count\n").is_err());
        assert!(matches!(
            ChordTable::parse("chord_type_id,count\n0-4-7,x\n"),
            Err(Error::ChordTable { line: 2, .. })
        ));
        let round = ChordTable::parse(&table.to_csv()).unwrap();
        assert_eq!(round, table);
    }

    #[test]
    fn bundled_table_parses() {
        let table = default_chord_table();
        assert!(table.total() > 0);
        assert!(table.count("0-4-7") > table.count("0-1-2"));
    }

    #[test]
    fn features_weighting() {
        let model = ConsonanceModel::new(Some(default_chord_table()));
        let f = model.features(&[n(0.0, 2.0, 60), n(0.0, 2.0, 64)]).unwrap();
        assert_eq!(f.roughness.std, 0.0);
        assert_eq!(f.roughness.min, f.roughness.max);
        assert_eq!(f.roughness.mean, f.roughness.min);

        let f = model.features(&[n(0.0, 1.0, 60), n(1.0, 2.0, 61)]).unwrap();
        let v1 = harmonicity(&[60]).unwrap();
        let v2 = harmonicity(&[61]).unwrap();
        assert!((f.harmonicity.mean - (v1 + v2) / 2.0).abs() < 1e-12);

        assert!(model.features(&[]).is_none());
        assert!(ConsonanceModel::new(None)
            .features(&[n(0.0, 1.0, 60)])
            .unwrap()
            .familiarity
            .is_none());
    }
}
