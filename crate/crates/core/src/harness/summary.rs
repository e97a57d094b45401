//! Order-statistic summaries of Monte Carlo errors.

use serde::Serialize;

use crate::error::{Error, Result};

/// Quartiles and mean of a sample of squared errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeSummary {
    pub q25: f64,
    pub median: f64,
    pub mean: f64,
    pub q75: f64,
}

impl SeSummary {
    /// `(label, value)` pairs in table order.
    pub fn stats(&self) -> [(&'static str, f64); 4] {
        [("Q25", self.q25), ("median", self.median), ("mean", self.mean), ("Q75", self.q75)]
    }
}

/// Type-7 empirical quantile of an ascending sample:
/// `x[⌊h⌋] + (h - ⌊h⌋)(x[⌊h⌋+1] - x[⌊h⌋])` with `h = (n - 1) q`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean by summation in the given order.
pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn summarize_se(values: &[f64]) -> Result<SeSummary> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidParameter("cannot summarize NaN values".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(SeSummary {
        q25: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        mean: mean(values),
        q75: quantile_sorted(&sorted, 0.75),
    })
}
