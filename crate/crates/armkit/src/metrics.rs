//! Error metrics and summary statistics for model evaluation.

use thiserror::Error;

/// Errors raised by the metric helpers.
#[derive(Debug, Error)]
pub enum MetricError {
    /// Inputs had different lengths.
    #[error("length mismatch: {0} predictions vs {1} actuals")]
    LengthMismatch(usize, usize),
    /// Inputs were empty.
    #[error("no values to aggregate")]
    Empty,
}

fn check(pred: &[f64], actual: &[f64]) -> Result<(), MetricError> {
    if pred.len() != actual.len() {
        return Err(MetricError::LengthMismatch(pred.len(), actual.len()));
    }
    if pred.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(())
}

/// Mean squared error.
pub fn mse(pred: &[f64], actual: &[f64]) -> Result<f64, MetricError> {
    check(pred, actual)?;
    let sum: f64 = pred
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a) * (p - a))
        .sum();
    Ok(sum / pred.len() as f64)
}

/// Root mean squared error.
pub fn rmse(pred: &[f64], actual: &[f64]) -> Result<f64, MetricError> {
    Ok(mse(pred, actual)?.sqrt())
}

/// Mean absolute error.
pub fn mae(pred: &[f64], actual: &[f64]) -> Result<f64, MetricError> {
    check(pred, actual)?;
    let sum: f64 = pred.iter().zip(actual).map(|(p, a)| (p - a).abs()).sum();
    Ok(sum / pred.len() as f64)
}

/// Mean, population standard deviation, maximum, and minimum of a set of
/// values (for per-trajectory error summaries).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SummaryStats {
    /// Arithmetic mean.
    pub mean: f64,
    /// Population standard deviation (zero for a single value).
    pub std: f64,
    /// Largest value.
    pub max: f64,
    /// Smallest value.
    pub min: f64,
}

impl SummaryStats {
    /// Aggregate a non-empty slice.
    pub fn from_values(values: &[f64]) -> Result<Self, MetricError> {
        if values.is_empty() {
            return Err(MetricError::Empty);
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Ok(SummaryStats {
            mean,
            std: var.sqrt(),
            max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            min: values.iter().cloned().fold(f64::INFINITY, f64::min),
        })
    }
}
