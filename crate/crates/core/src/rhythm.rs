//! Rhythm regularity: inter-onset-interval histograms, their spectral
//! flatness, and K-means dispersion of IOI clusters.

use serde::Serialize;

use crate::model::Note;
use crate::stats::Summary;

pub const FLATNESS_EPSILON: f64 = 1e-5;
pub const KMEANS_TOLERANCE: f64 = 1e-9;
pub const KMEANS_MAX_ITERATIONS: usize = 100;

/// Histogram bin edges in seconds. Bins are right-open except the last,
/// which is closed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bins {
    edges: Vec<f64>,
}

impl Bins {
    /// Builds bins from edges given in milliseconds.
    pub fn from_millis(edges_ms: &[u32]) -> Option<Bins> {
        if edges_ms.len() < 2 || edges_ms.windows(2).any(|w| w[1] <= w[0]) {
            return None;
        }
        Some(Bins {
            edges: edges_ms.iter().map(|&ms| f64::from(ms) / 1000.0).collect(),
        })
    }

    /// 10 ms bins up to 0.1 s, then 100 ms bins up to 2 s: 29 bins.
    pub fn fine() -> Bins {
        let ms: Vec<u32> = (0..=100).step_by(10).chain((200..=2000).step_by(100)).collect();
        Bins::from_millis(&ms).expect("static edges")
    }

    /// 20 ms bins up to 0.1 s, then 200 ms bins up to 2 s: 15 bins, the last
    /// one only 100 ms wide.
    pub fn coarse() -> Bins {
        let ms: Vec<u32> = (0..=100)
            .step_by(20)
            .chain((300..=1900).step_by(200))
            .chain([2000])
            .collect();
        Bins::from_millis(&ms).expect("static edges")
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn upper(&self) -> f64 {
        *self.edges.last().expect("at least two edges")
    }

    pub fn center(&self, bin: usize) -> f64 {
        0.5 * (self.edges[bin] + self.edges[bin + 1])
    }

    /// Bin holding `value`, `None` outside `[0, upper]`.
    pub fn bin_of(&self, value: f64) -> Option<usize> {
        if !(value >= self.edges[0] && value <= self.upper()) {
            return None;
        }
        let idx = self.edges.partition_point(|&e| e <= value);
        Some((idx - 1).min(self.len() - 1))
    }

    pub fn contains(&self, value: f64) -> bool {
        self.bin_of(value).is_some()
    }
}

/// Inter-onset intervals of the onsets sorted ascending (chords yield zeros).
pub fn compute_ioi(notes: &[Note]) -> Vec<f64> {
    let mut onsets: Vec<f64> = notes.iter().map(Note::onset).collect();
    onsets.sort_by(f64::total_cmp);
    onsets.windows(2).map(|w| w[1] - w[0]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IoiHistogram {
    pub bins: Bins,
    /// Normalised to sum 1, or all zero when no IOI is in range.
    pub mass: Vec<f64>,
    pub in_range: usize,
}

impl IoiHistogram {
    pub fn has_mass(&self) -> bool {
        self.in_range > 0
    }
}

pub fn ioi_histogram(iois: &[f64], bins: &Bins) -> IoiHistogram {
    let mut counts = vec![0usize; bins.len()];
    for &ioi in iois {
        if let Some(b) = bins.bin_of(ioi) {
            counts[b] += 1;
        }
    }
    let in_range: usize = counts.iter().sum();
    let mass = counts
        .iter()
        .map(|&c| if in_range == 0 { 0.0 } else { c as f64 / in_range as f64 })
        .collect();
    IoiHistogram {
        bins: bins.clone(),
        mass,
        in_range,
    }
}

/// Log ratio of geometric to arithmetic mean of `h + epsilon`; at most 0.
pub fn spectral_flatness(mass: &[f64], epsilon: f64) -> f64 {
    let n = mass.len() as f64;
    let mean_log = mass.iter().map(|h| (h + epsilon).ln()).sum::<f64>() / n;
    let mean = mass.iter().map(|h| h + epsilon).sum::<f64>() / n;
    (mean_log - mean.ln()).min(0.0)
}

pub fn notes_flatness(notes: &[Note], bins: &Bins, epsilon: f64) -> f64 {
    spectral_flatness(&ioi_histogram(&compute_ioi(notes), bins).mass, epsilon)
}

/// `(flatness of the output, flatness of output minus flatness of target)`.
pub fn flatness_features(targets: &[Note], outputs: &[Note], bins: &Bins, epsilon: f64) -> (f64, f64) {
    let out = notes_flatness(outputs, bins, epsilon);
    let tgt = notes_flatness(targets, bins, epsilon);
    (out, out - tgt)
}

/// Centres of histogram peaks. A peak is a maximal run of equal positive
/// values strictly above its neighbours (missing neighbours at the edges
/// count as lower); its leftmost bin is reported.
pub fn histogram_peaks(hist: &IoiHistogram) -> Vec<f64> {
    let m = &hist.mass;
    let mut peaks = Vec::new();
    let mut i = 0;
    while i < m.len() {
        let mut j = i;
        while j + 1 < m.len() && m[j + 1] == m[i] {
            j += 1;
        }
        let left_lower = i == 0 || m[i - 1] < m[i];
        let right_lower = j + 1 == m.len() || m[j + 1] < m[i];
        if m[i] > 0.0 && left_lower && right_lower {
            peaks.push(hist.bins.center(i));
        }
        i = j + 1;
    }
    peaks
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterSet {
    pub centers: Vec<f64>,
    /// Population standard deviation, `None` for empty clusters.
    pub stds: Vec<Option<f64>>,
    /// Indices into the clustered values.
    pub members: Vec<Vec<usize>>,
    pub iterations: usize,
}

impl ClusterSet {
    /// Within-cluster sum of squared distances to the centres.
    pub fn inertia(&self, values: &[f64]) -> f64 {
        self.members
            .iter()
            .zip(&self.centers)
            .map(|(m, c)| m.iter().map(|&i| (values[i] - c).powi(2)).sum::<f64>())
            .sum()
    }
}

fn nearest(centers: &[f64], v: f64) -> usize {
    let mut best = 0;
    for (k, c) in centers.iter().enumerate().skip(1) {
        if (v - c).abs() < (v - centers[best]).abs() {
            best = k;
        }
    }
    best
}

fn assign(values: &[f64], centers: &[f64]) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); centers.len()];
    for (i, &v) in values.iter().enumerate() {
        members[nearest(centers, v)].push(i);
    }
    members
}

/// One-dimensional Lloyd iterations from the given centres. Ties go to the
/// lower-index centre; empty clusters keep their previous centre.
pub fn kmeans_1d(values: &[f64], initial: &[f64], tolerance: f64, max_iterations: usize) -> ClusterSet {
    assert!(!initial.is_empty(), "kmeans_1d needs at least one centre");
    let mut centers = initial.to_vec();
    let mut iterations = 0;
    while iterations < max_iterations {
        iterations += 1;
        let members = assign(values, &centers);
        let mut movement: f64 = 0.0;
        for (c, m) in centers.iter_mut().zip(&members) {
            if m.is_empty() {
                continue;
            }
            let updated = m.iter().map(|&i| values[i]).sum::<f64>() / m.len() as f64;
            movement = movement.max((updated - *c).abs());
            *c = updated;
        }
        if movement < tolerance {
            break;
        }
    }
    let members = assign(values, &centers);
    let stds = members
        .iter()
        .map(|m| {
            let vals: Vec<f64> = m.iter().map(|&i| values[i]).collect();
            Summary::of(&vals).map(|s| s.std)
        })
        .collect();
    ClusterSet {
        centers,
        stds,
        members,
        iterations,
    }
}

/// Aggregates of per-cluster centre drift and standard deviation change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Dispersion {
    pub drift: Summary,
    pub std_change: Summary,
    pub clusters: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispersionConfig {
    pub bins: Bins,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for DispersionConfig {
    fn default() -> Self {
        DispersionConfig {
            bins: Bins::coarse(),
            tolerance: KMEANS_TOLERANCE,
            max_iterations: KMEANS_MAX_ITERATIONS,
        }
    }
}

/// Cluster target IOIs from the coarse-histogram peaks, re-cluster the
/// output IOIs from the converged target centres, and compare cluster by
/// cluster. Clusters empty on either side are skipped; `None` when no
/// cluster survives or either side has no in-range IOI.
pub fn rhythm_dispersion(targets: &[Note], outputs: &[Note], config: &DispersionConfig) -> Option<Dispersion> {
    let in_range = |notes: &[Note]| -> Vec<f64> {
        compute_ioi(notes)
            .into_iter()
            .filter(|&v| config.bins.contains(v))
            .collect()
    };
    let target_iois = in_range(targets);
    let output_iois = in_range(outputs);
    if target_iois.is_empty() || output_iois.is_empty() {
        return None;
    }
    let peaks = histogram_peaks(&ioi_histogram(&target_iois, &config.bins));
    let target = kmeans_1d(&target_iois, &peaks, config.tolerance, config.max_iterations);
    let output = kmeans_1d(&output_iois, &target.centers, config.tolerance, config.max_iterations);

    let mut drifts = Vec::new();
    let mut changes = Vec::new();
    for k in 0..target.centers.len() {
        if let (Some(st), Some(so)) = (target.stds[k], output.stds[k]) {
            drifts.push((output.centers[k] - target.centers[k]).abs());
            changes.push(so - st);
        }
    }
    Some(Dispersion {
        drift: Summary::of(&drifts)?,
        std_change: Summary::of(&changes)?,
        clusters: drifts.len(),
    })
}
