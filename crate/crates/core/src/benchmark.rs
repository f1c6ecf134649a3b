//! Framewise and notewise precision, recall and F-measure.

use serde::Serialize;

use crate::error::Result;
use crate::matching::{max_match, Criterion, Matching};
use crate::model::{Note, PianoRoll, NUM_PITCHES};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PrfCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl PrfCounts {
    pub fn new(tp: usize, fp: usize, fn_: usize) -> Self {
        PrfCounts { tp, fp, fn_ }
    }

    pub fn prf(&self) -> PrfResult {
        prf(*self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrfResult {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

/// Precision, recall and F-measure from counts.
///
/// When there is nothing to find and nothing was found the result is a
/// perfect 1/1/1. Otherwise an empty denominator gives 0, and F is 0 when
/// `P + R = 0`.
pub fn prf(counts: PrfCounts) -> PrfResult {
    let PrfCounts { tp, fp, fn_ } = counts;
    if tp + fp == 0 && tp + fn_ == 0 {
        return PrfResult {
            precision: 1.0,
            recall: 1.0,
            f_measure: 1.0,
        };
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f_measure = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    PrfResult {
        precision,
        recall,
        f_measure,
    }
}

/// Cell-wise TP/FP/FN over two aligned rolls.
pub fn framewise_counts(target: &PianoRoll, output: &PianoRoll) -> Result<PrfCounts> {
    target.check_same_shape(output)?;
    let mut counts = PrfCounts::default();
    for row in 0..NUM_PITCHES {
        for (&m, &m_hat) in target.row(row).iter().zip(output.row(row)) {
            match (m, m_hat) {
                (true, true) => counts.tp += 1,
                (false, true) => counts.fp += 1,
                (true, false) => counts.fn_ += 1,
                (false, false) => {}
            }
        }
    }
    Ok(counts)
}

pub fn counts_from_matching(matching: &Matching) -> PrfCounts {
    PrfCounts {
        tp: matching.len(),
        fp: matching.false_positives(),
        fn_: matching.false_negatives(),
    }
}

pub fn notewise_prf(targets: &[Note], outputs: &[Note], criterion: Criterion) -> PrfResult {
    prf(counts_from_matching(&max_match(targets, outputs, criterion)))
}
