//! Maximum bipartite matching of target and output notes.

use std::collections::{HashMap, VecDeque};

use crate::model::Note;

pub const ONSET_TOLERANCE: f64 = 0.050;
pub const OFFSET_RATIO: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Criterion {
    OnsetOnly,
    OnsetOffset,
}

/// Tolerances of the admissibility predicates. All comparisons are strict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub onset: f64,
    pub offset_ratio: f64,
    pub offset_floor: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            onset: ONSET_TOLERANCE,
            offset_ratio: OFFSET_RATIO,
            offset_floor: ONSET_TOLERANCE,
        }
    }
}

impl Tolerance {
    pub fn admissible(&self, criterion: Criterion, target: &Note, output: &Note) -> bool {
        if target.pitch() != output.pitch() || (output.onset() - target.onset()).abs() >= self.onset {
            return false;
        }
        match criterion {
            Criterion::OnsetOnly => true,
            Criterion::OnsetOffset => {
                let window = self.offset_floor.max(self.offset_ratio * target.duration());
                (output.offset() - target.offset()).abs() < window
            }
        }
    }
}

pub fn admissible_onset_only(target: &Note, output: &Note) -> bool {
    Tolerance::default().admissible(Criterion::OnsetOnly, target, output)
}

pub fn admissible_onset_offset(target: &Note, output: &Note) -> bool {
    Tolerance::default().admissible(Criterion::OnsetOffset, target, output)
}

/// One-to-one pairing of target and output note indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    /// `(target_index, output_index)` sorted by target index.
    pub pairs: Vec<(usize, usize)>,
    pub criterion: Criterion,
    target_to_output: Vec<Option<usize>>,
    output_to_target: Vec<Option<usize>>,
}

impl Matching {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn output_for(&self, target: usize) -> Option<usize> {
        self.target_to_output[target]
    }

    pub fn target_for(&self, output: usize) -> Option<usize> {
        self.output_to_target[output]
    }

    pub fn is_target_matched(&self, target: usize) -> bool {
        self.target_to_output[target].is_some()
    }

    pub fn is_output_matched(&self, output: usize) -> bool {
        self.output_to_target[output].is_some()
    }

    /// Indices of unmatched target notes (false negatives).
    pub fn unmatched_targets(&self) -> impl Iterator<Item = usize> + '_ {
        self.target_to_output
            .iter()
            .enumerate()
            .filter(|(_, m)| m.is_none())
            .map(|(i, _)| i)
    }

    /// Indices of unmatched output notes (false positives).
    pub fn unmatched_outputs(&self) -> impl Iterator<Item = usize> + '_ {
        self.output_to_target
            .iter()
            .enumerate()
            .filter(|(_, m)| m.is_none())
            .map(|(i, _)| i)
    }

    pub fn false_negatives(&self) -> usize {
        self.target_to_output.len() - self.pairs.len()
    }

    pub fn false_positives(&self) -> usize {
        self.output_to_target.len() - self.pairs.len()
    }
}

/// Maximum-cardinality matching under the default tolerances.
pub fn max_match(targets: &[Note], outputs: &[Note], criterion: Criterion) -> Matching {
    max_match_with(targets, outputs, criterion, &Tolerance::default())
}

/// Hopcroft-Karp on the admissibility graph.
///
/// Targets are visited in `(onset, pitch)` order and each target's candidates
/// in ascending onset distance, so the reported pairs are deterministic.
pub fn max_match_with(targets: &[Note], outputs: &[Note], criterion: Criterion, tolerance: &Tolerance) -> Matching {
    let adjacency = build_adjacency(targets, outputs, criterion, tolerance);
    let mut order: Vec<usize> = (0..targets.len()).collect();
    order.sort_by(|&a, &b| {
        targets[a]
            .onset()
            .total_cmp(&targets[b].onset())
            .then(targets[a].pitch().cmp(&targets[b].pitch()))
            .then(a.cmp(&b))
    });
    let (target_to_output, output_to_target) = hopcroft_karp(&adjacency, &order, outputs.len());
    let pairs = target_to_output
        .iter()
        .enumerate()
        .filter_map(|(t, o)| o.map(|o| (t, o)))
        .collect();
    Matching {
        pairs,
        criterion,
        target_to_output,
        output_to_target,
    }
}

fn build_adjacency(targets: &[Note], outputs: &[Note], criterion: Criterion, tolerance: &Tolerance) -> Vec<Vec<usize>> {
    let mut by_pitch: HashMap<u8, Vec<usize>> = HashMap::new();
    for (i, o) in outputs.iter().enumerate() {
        by_pitch.entry(o.pitch()).or_default().push(i);
    }
    for list in by_pitch.values_mut() {
        list.sort_by(|&a, &b| outputs[a].onset().total_cmp(&outputs[b].onset()));
    }
    targets
        .iter()
        .map(|t| {
            let Some(same_pitch) = by_pitch.get(&t.pitch()) else {
                return Vec::new();
            };
            // The slack only widens the scan; `admissible` makes the decision.
            let (lo_time, hi_time) = (t.onset() - tolerance.onset - 1e-9, t.onset() + tolerance.onset + 1e-9);
            let lo = same_pitch.partition_point(|&o| outputs[o].onset() < lo_time);
            let mut candidates: Vec<usize> = same_pitch[lo..]
                .iter()
                .take_while(|&&o| outputs[o].onset() <= hi_time)
                .copied()
                .filter(|&o| tolerance.admissible(criterion, t, &outputs[o]))
                .collect();
            candidates.sort_by(|&a, &b| {
                let da = (outputs[a].onset() - t.onset()).abs();
                let db = (outputs[b].onset() - t.onset()).abs();
                da.total_cmp(&db).then(a.cmp(&b))
            });
            candidates
        })
        .collect()
}

const UNREACHED: usize = usize::MAX;

fn hopcroft_karp(
    adjacency: &[Vec<usize>],
    order: &[usize],
    n_outputs: usize,
) -> (Vec<Option<usize>>, Vec<Option<usize>>) {
    let n_targets = adjacency.len();
    let mut t2o: Vec<Option<usize>> = vec![None; n_targets];
    let mut o2t: Vec<Option<usize>> = vec![None; n_outputs];
    let mut layer = vec![UNREACHED; n_targets];

    loop {
        // BFS from free targets builds the layered graph.
        let mut queue = VecDeque::new();
        for &t in order {
            if t2o[t].is_none() {
                layer[t] = 0;
                queue.push_back(t);
            } else {
                layer[t] = UNREACHED;
            }
        }
        let mut found = false;
        while let Some(t) = queue.pop_front() {
            for &o in &adjacency[t] {
                match o2t[o] {
                    None => found = true,
                    Some(next) if layer[next] == UNREACHED => {
                        layer[next] = layer[t] + 1;
                        queue.push_back(next);
                    }
                    Some(_) => {}
                }
            }
        }
        if !found {
            break;
        }
        let mut cursor = vec![0usize; n_targets];
        for &t in order {
            if t2o[t].is_none() {
                augment(t, adjacency, &mut t2o, &mut o2t, &mut layer, &mut cursor);
            }
        }
    }
    (t2o, o2t)
}

/// Iterative DFS along the layered graph; flips the path when it reaches a
/// free output.
fn augment(
    root: usize,
    adjacency: &[Vec<usize>],
    t2o: &mut [Option<usize>],
    o2t: &mut [Option<usize>],
    layer: &mut [usize],
    cursor: &mut [usize],
) -> bool {
    let mut stack: Vec<(usize, usize)> = Vec::new(); // (target, output taken)
    let mut current = root;
    loop {
        let edges = &adjacency[current];
        let mut advanced = false;
        while cursor[current] < edges.len() {
            let o = edges[cursor[current]];
            cursor[current] += 1;
            match o2t[o] {
                None => {
                    stack.push((current, o));
                    for &(t, o) in &stack {
                        t2o[t] = Some(o);
                        o2t[o] = Some(t);
                    }
                    return true;
                }
                Some(next) if layer[next] == layer[current] + 1 => {
                    stack.push((current, o));
                    current = next;
                    advanced = true;
                    break;
                }
                Some(_) => {}
            }
        }
        if !advanced {
            layer[current] = UNREACHED;
            match stack.pop() {
                Some((prev, _)) => current = prev,
                None => return false,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(s: f64, e: f64, p: i64) -> Note {
        Note::new(s, e, p, None).unwrap()
    }

    #[test]
    fn onset_only_predicate() {
        let t = n(0.0, 1.0, 60);
        assert!(admissible_onset_only(&t, &n(0.049, 0.8, 60)));
        assert!(!admissible_onset_only(&t, &n(0.050, 1.0, 60)));
        assert!(!admissible_onset_only(&t, &n(0.01, 1.0, 61)));
    }

    #[test]
    fn onset_offset_predicate() {
        let t = n(0.0, 1.0, 60);
        assert!(admissible_onset_offset(&t, &n(0.01, 0.85, 60)));
        assert!(admissible_onset_offset(&n(0.0, 0.1, 60), &n(0.0, 0.149, 60)));
        assert!(!admissible_onset_offset(&t, &n(0.01, 1.25, 60)));
    }

    #[test]
    fn simple_matches() {
        let m = max_match(&[n(0.0, 1.0, 60)], &[n(0.03, 0.9, 60)], Criterion::OnsetOnly);
        assert_eq!(m.pairs, vec![(0, 0)]);
        let m = max_match(&[], &[n(0.0, 1.0, 60)], Criterion::OnsetOnly);
        assert!(m.is_empty());
        assert_eq!(m.false_positives(), 1);
    }

    #[test]
    fn cross_pairing_when_offsets_constrain() {
        // Nearest-first would pair target 1 with output 0 and strand target 0.
        let targets = [n(0.0, 1.0, 60), n(0.04, 0.3, 60)];
        let outputs = [n(0.04, 0.3, 60), n(0.0, 1.0, 60)];
        let m = max_match(&targets, &outputs, Criterion::OnsetOffset);
        assert_eq!(m.len(), 2);
        assert_eq!(m.pairs, vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn greedy_trap_needs_augmentation() {
        // target 0 prefers output 0, which is the only option of target 1.
        let targets = [n(0.1, 1.0, 60), n(0.16, 1.0, 60)];
        let outputs = [n(0.12, 1.0, 60), n(0.06, 1.0, 60)];
        let m = max_match(&targets, &outputs, Criterion::OnsetOnly);
        assert_eq!(m.len(), 2);
        assert_eq!(m.output_for(0), Some(1));
        assert_eq!(m.output_for(1), Some(0));
    }
}
