//! Small statistics kit: compensated sums, batch-means error bars, trimming.
//!
//! All reductions walk their input in index order, so a result depends only
//! on the values and never on how they were produced in parallel.

use serde::{Deserialize, Serialize};

/// Default number of batches for batch-means standard errors.
pub const DEFAULT_BATCHES: usize = 100;

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    compensated_sum(values.iter().copied()) / values.len() as f64
}

/// A mean with its batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Mean of `values` with a standard error from `batches` contiguous batch means.
///
/// Batch sizes differ by at most one. With fewer values than batches every
/// value is its own batch.
pub fn batch_means(values: &[f64], batches: usize) -> Estimate {
    let n = values.len();
    if n == 0 {
        return Estimate {
            mean: f64::NAN,
            std_error: f64::NAN,
        };
    }
    let b = batches.clamp(1, n);
    let batch_avgs: Vec<f64> = (0..b)
        .map(|i| {
            let lo = i * n / b;
            let hi = (i + 1) * n / b;
            mean(&values[lo..hi])
        })
        .collect();
    let overall = mean(values);
    let std_error = if b < 2 {
        f64::NAN
    } else {
        let grand = mean(&batch_avgs);
        let var = compensated_sum(batch_avgs.iter().map(|m| (m - grand) * (m - grand))) / (b - 1) as f64;
        (var / b as f64).sqrt()
    };
    Estimate {
        mean: overall,
        std_error,
    }
}

/// Binomial standard error of a proportion estimated from `n` draws.
pub fn proportion_std_error(p: f64, n: usize) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Root mean square of `values` after discarding the largest `floor(eta * n)`.
///
/// `values` are squared deviations. Returns `NaN` when nothing is left.
pub fn trimmed_rms(values: &[f64], eta: f64) -> f64 {
    let n = values.len();
    let drop = ((eta * n as f64).floor() as usize).min(n);
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let kept = &sorted[..n - drop];
    if kept.is_empty() {
        return f64::NAN;
    }
    mean(kept).sqrt()
}

/// Count, mean, extremes and failures of a set of normalized statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: u64,
    pub failures: u64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    /// Summarizes finite values; `failures` is supplied by the caller.
    pub fn from_values(values: &[f64], failures: u64) -> Self {
        let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        if finite.is_empty() {
            return Self {
                count: values.len() as u64,
                failures,
                mean: 0.0,
                min: 0.0,
                max: 0.0,
            };
        }
        Self {
            count: values.len() as u64,
            failures,
            mean: mean(&finite),
            min: finite.iter().copied().fold(f64::INFINITY, f64::min),
            max: finite.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}
