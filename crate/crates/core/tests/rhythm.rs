// oracles index grids directly to mirror the definitions
#![allow(clippy::needless_range_loop)]

mod common;

use amt_eval::harness::{perturb, validate_rhythm, Condition, Perturbation, ValidationOptions};
use amt_eval::model::{NoteList, Role};
use amt_eval::rhythm::{
    histogram_peaks, ioi_histogram, kmeans_1d, rhythm_dispersion, spectral_flatness, Bins, DispersionConfig,
    IoiHistogram,
};
use amt_eval::synth::{tonal_corpus, SynthParams};
use common::{note, random_notes};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn drift_ordered_by_perturbation_strength() {
    let pieces = tonal_corpus(30, 2024, &SynthParams::default());
    let options = ValidationOptions {
        conditions: vec![
            Condition::QuantConstant,
            Condition::Noisy(0),
            Condition::Noisy(100),
            Condition::Noisy(300),
        ],
        seeds: vec![1, 2],
        ..Default::default()
    };
    let report = validate_rhythm(&pieces, &options);
    let drift = |c: &str| report.condition(c).unwrap().mean[5].unwrap();
    assert!(drift("Noisy-300") > drift("Noisy-100"));
    assert!(drift("Noisy-100") > drift("Quant-constant"));
    let unperturbed = report.condition("Noisy-0").unwrap();
    for f in 2..8 {
        assert_eq!(unperturbed.mean[f], Some(0.0));
        assert_eq!(unperturbed.std[f], Some(0.0));
    }
}

fn single_bin_flatness(n: usize, eps: f64) -> f64 {
    let n_f = n as f64;
    ((1.0 + eps).ln() + (n_f - 1.0) * eps.ln()) / n_f - ((1.0 + n_f * eps) / n_f).ln()
}

#[test]
fn flatness_closed_forms() {
    let fine = Bins::fine();
    assert_eq!(fine.len(), 29);
    assert!(spectral_flatness(&vec![1.0 / 29.0; 29], 1e-5).abs() < 1e-12);
    let mut one = vec![0.0; 29];
    one[4] = 1.0;
    let value = spectral_flatness(&one, 1e-5);
    assert!((value - single_bin_flatness(29, 1e-5)).abs() < 1e-12);
    assert!((value + 7.75).abs() < 0.01, "{value}");
}

#[test]
fn flatness_never_positive() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..1000 {
        let n = rng.gen_range(1..40);
        let raw: Vec<f64> = (0..n)
            .map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen() })
            .collect();
        let total: f64 = raw.iter().sum();
        let mass: Vec<f64> = raw.iter().map(|v| if total > 0.0 { v / total } else { 0.0 }).collect();
        assert!(spectral_flatness(&mass, 1e-5) <= 0.0);
    }
}

fn peaks_oracle(h: &IoiHistogram) -> Vec<f64> {
    let m = &h.mass;
    let mut out = Vec::new();
    for i in 0..m.len() {
        if m[i] <= 0.0 || (i > 0 && m[i - 1] == m[i]) {
            continue;
        }
        let mut j = i;
        while j + 1 < m.len() && m[j + 1] == m[i] {
            j += 1;
        }
        let left = i == 0 || m[i - 1] < m[i];
        let right = j == m.len() - 1 || m[j + 1] < m[i];
        if left && right {
            out.push(h.bins.center(i));
        }
    }
    out
}

#[test]
fn peaks_match_neighbour_scan() {
    let coarse = Bins::coarse();
    let mut plateau = vec![0.0; 15];
    plateau[3] = 0.25;
    plateau[4] = 0.25;
    plateau[5] = 0.25;
    plateau[9] = 0.25;
    let h = IoiHistogram {
        bins: coarse.clone(),
        mass: plateau,
        in_range: 4,
    };
    assert_eq!(histogram_peaks(&h), vec![coarse.center(3), coarse.center(9)]);

    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..500 {
        let iois: Vec<f64> = (0..rng.gen_range(0..12))
            .map(|_| f64::from(rng.gen_range(0..25u32)) * 0.08)
            .collect();
        let h = ioi_histogram(&iois, &coarse);
        let peaks = histogram_peaks(&h);
        assert_eq!(peaks, peaks_oracle(&h));
        if h.has_mass() {
            assert!(!peaks.is_empty());
        }
    }
}

fn reference_lloyd(values: &[f64], initial: &[f64]) -> Vec<usize> {
    let mut centers = initial.to_vec();
    let assign = |centers: &[f64]| -> Vec<usize> {
        values
            .iter()
            .map(|v| {
                let mut best = 0;
                for k in 0..centers.len() {
                    if (v - centers[k]).abs() < (v - centers[best]).abs() {
                        best = k;
                    }
                }
                best
            })
            .collect()
    };
    for _ in 0..1_000 {
        let labels = assign(&centers);
        for k in 0..centers.len() {
            let members: Vec<f64> = values
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == k)
                .map(|(v, _)| *v)
                .collect();
            if !members.is_empty() {
                centers[k] = members.iter().sum::<f64>() / members.len() as f64;
            }
        }
    }
    assign(&centers)
}

#[test]
fn kmeans_matches_long_reference_run() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for _ in 0..200 {
        let values: Vec<f64> = (0..rng.gen_range(1..30)).map(|_| rng.gen_range(0.0..2.0)).collect();
        let initial: Vec<f64> = (0..rng.gen_range(1..5)).map(|_| rng.gen_range(0.0..2.0)).collect();
        let clusters = kmeans_1d(&values, &initial, 1e-9, 100);
        let mut labels = vec![usize::MAX; values.len()];
        for (k, members) in clusters.members.iter().enumerate() {
            for &i in members {
                labels[i] = k;
            }
        }
        assert_eq!(labels, reference_lloyd(&values, &initial));
    }
    let c = kmeans_1d(&[0.5, 0.5, 1.0, 1.0], &[0.5, 1.0], 1e-9, 100);
    assert_eq!(c.centers, vec![0.5, 1.0]);
    assert_eq!(c.stds, vec![Some(0.0), Some(0.0)]);
}

#[test]
fn noisy_offsets_are_uniform() {
    let notes: Vec<_> = (0..2000)
        .map(|i| note(1.0 + i as f64 * 0.5, 1.2 + i as f64 * 0.5, 60, None))
        .collect();
    let list = NoteList::new(notes, vec![], Role::Output).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let out = perturb(&list, &Perturbation::Noisy { half_width: 0.3 }, &mut rng);
    let mut shifts: Vec<f64> = out
        .notes()
        .iter()
        .zip(list.notes())
        .map(|(a, b)| a.onset() - b.onset())
        .collect();
    assert!(shifts.iter().all(|d| d.abs() <= 0.3 + 1e-12));
    shifts.sort_by(f64::total_cmp);
    let n = shifts.len() as f64;
    let d = shifts
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = (x + 0.3) / 0.6;
            (cdf - i as f64 / n).abs().max(((i + 1) as f64 / n - cdf).abs())
        })
        .fold(0.0, f64::max);
    assert!(d < 1.36 / n.sqrt(), "KS statistic {d}");
}

proptest! {
    #[test]
    fn kmeans_inertia_never_increases(
        values in prop::collection::vec(0.0f64..2.0, 1..40),
        initial in prop::collection::vec(0.0f64..2.0, 1..5),
    ) {
        let mut previous = f64::INFINITY;
        for iterations in 1..12 {
            let c = kmeans_1d(&values, &initial, 0.0, iterations);
            let inertia = c.inertia(&values);
            prop_assert!(inertia <= previous + 1e-12);
            previous = inertia;
        }
    }

    #[test]
    fn identical_lists_have_zero_dispersion(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let notes = random_notes(&mut rng, 12, 150, 0.01, 50..=70, false);
        if let Some(d) = rhythm_dispersion(&notes, &notes, &DispersionConfig::default()) {
            for s in [d.drift, d.std_change] {
                prop_assert_eq!((s.mean, s.std, s.min, s.max), (0.0, 0.0, 0.0, 0.0));
            }
        }
    }

    #[test]
    fn noise_preserves_pitches_and_durations(seed in 0u64..1000, width in 0.0f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let notes = random_notes(&mut rng, 15, 200, 0.01, 30..=90, false);
        let list = NoteList::new(notes, vec![], Role::Output).unwrap();
        let out = perturb(&list, &Perturbation::Noisy { half_width: width }, &mut rng);
        prop_assert_eq!(out.len(), list.len());
        let key = |l: &NoteList| {
            let mut v: Vec<(u8, i64)> = l.notes().iter().map(|n| (n.pitch(), (n.duration() * 1e6).round() as i64)).collect();
            v.sort();
            v
        };
        prop_assert_eq!(key(&out), key(&list));
    }
}
