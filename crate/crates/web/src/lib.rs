//! Browser bindings for the demo page in `www/`.
//!
//! Each export returns a JSON string; the plain functions underneath are
//! what the native tests exercise.

use amt_eval::consonance::{default_chord_table, harmonicity, midi_to_hz, roughness_of_fundamentals};
use amt_eval::harness::{perturb, Perturbation};
use amt_eval::ingest::parse_notes_text;
use amt_eval::rhythm::{compute_ioi, ioi_histogram, spectral_flatness, Bins};
use amt_eval::{evaluate_pair, EvalConfig, Role};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Feature vector of a pair given as note text (`onset offset pitch [velocity]`).
pub fn evaluate_text(target: &str, output: &str) -> Result<String, String> {
    let t = parse_notes_text(target, Role::Target)
        .or_else(|_| parse_notes_text(target, Role::Output))
        .map_err(|e| format!("target: {e}"))?;
    let o = parse_notes_text(output, Role::Output).map_err(|e| format!("output: {e}"))?;
    let table = default_chord_table();
    let fv = evaluate_pair(&t, &o, &EvalConfig::default(), Some(&table)).map_err(|e| e.to_string())?;
    Ok(fv.to_json().to_string())
}

/// Roughness of a two-tone chord over `0..=span` cents above `low`, plus
/// harmonicity at each whole semitone.
pub fn dyad_curve(low: u8, span: u32, step: u32) -> Result<String, String> {
    if !(21..=108).contains(&low) || step == 0 {
        return Err("low pitch must be 21..=108 and step positive".into());
    }
    let f0 = midi_to_hz(f64::from(low));
    let cents: Vec<u32> = (0..=span).step_by(step as usize).collect();
    let roughness: Vec<f64> = cents
        .iter()
        .map(|&c| roughness_of_fundamentals(&[f0, f0 * 2f64.powf(f64::from(c) / 1200.0)]))
        .collect();
    let mut semitones = Vec::new();
    let mut harm = Vec::new();
    for k in 0..=span / 100 {
        let Ok(upper) = u8::try_from(u32::from(low) + k) else {
            break;
        };
        if upper > 108 {
            break;
        }
        semitones.push(k * 100);
        harm.push(harmonicity(&[low, upper]).map_err(|e| e.to_string())?);
    }
    Ok(json!({
        "cents": cents,
        "roughness": roughness,
        "semitone_cents": semitones,
        "harmonicity": harm,
    })
    .to_string())
}

/// Fine IOI histograms of a note list before and after uniform onset noise.
pub fn noisy_histograms(notes: &str, noise_ms: u32, seed: u64) -> Result<String, String> {
    let list = parse_notes_text(notes, Role::Output).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noisy = perturb(
        &list,
        &Perturbation::Noisy {
            half_width: f64::from(noise_ms) / 1000.0,
        },
        &mut rng,
    );
    let bins = Bins::fine();
    let epsilon = EvalConfig::default().flatness_epsilon;
    let describe = |notes: &[amt_eval::Note]| {
        let hist = ioi_histogram(&compute_ioi(notes), &bins);
        json!({
            "mass": hist.mass,
            "flatness": spectral_flatness(&hist.mass, epsilon),
        })
    };
    Ok(json!({
        "edges": bins.edges(),
        "original": describe(list.notes()),
        "noisy": describe(noisy.notes()),
    })
    .to_string())
}

#[wasm_bindgen(js_name = evaluateText)]
pub fn evaluate_text_js(target: &str, output: &str) -> Result<String, JsValue> {
    evaluate_text(target, output).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = dyadCurve)]
pub fn dyad_curve_js(low: u8, span: u32, step: u32) -> Result<String, JsValue> {
    dyad_curve(low, span, step).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = noisyHistograms)]
pub fn noisy_histograms_js(notes: &str, noise_ms: u32, seed: u32) -> Result<String, JsValue> {
    noisy_histograms(notes, noise_ms, u64::from(seed)).map_err(|e| JsValue::from_str(&e))
}
