use serde::Serialize;

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Mean, standard deviation, minimum and maximum of a series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub const ZERO: Summary = Summary {
        mean: 0.0,
        std: 0.0,
        min: 0.0,
        max: 0.0,
    };

    /// Population statistics; `None` for an empty series.
    pub fn of(values: &[f64]) -> Option<Summary> {
        let weights = vec![1.0; values.len()];
        Summary::weighted(values, &weights)
    }

    /// Weighted mean and weighted population standard deviation, with the
    /// plain min and max of the values.
    pub fn weighted(values: &[f64], weights: &[f64]) -> Option<Summary> {
        assert_eq!(values.len(), weights.len());
        let total: f64 = weights.iter().sum();
        if values.is_empty() || total <= 0.0 {
            return None;
        }
        let mean = values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total;
        let var = values
            .iter()
            .zip(weights)
            .map(|(v, w)| w * (v - mean) * (v - mean))
            .sum::<f64>()
            / total;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(Summary {
            mean: mean.clamp(min, max),
            std: var.max(0.0).sqrt(),
            min,
            max,
        })
    }
}

/// Sample mean and sample standard deviation (n - 1), used for reporting
/// across pieces.
pub fn mean_and_sample_std(values: &[f64]) -> Option<(f64, f64)> {
    let m = mean(values)?;
    if values.len() < 2 {
        return Some((m, 0.0));
    }
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64;
    Some((m, var.sqrt()))
}
