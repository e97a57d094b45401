use serde::{Deserialize, Serialize};

use crate::bandwidth::{BandwidthRule, CvOptions};
use crate::kernel::Kernel;
use crate::metric::SemiMetric;

/// Tuning of the kernel estimator.
///
/// Deserializes from
///
/// ```toml
/// kernel = "quadratic"
/// semimetric = "l2deriv2"
/// bandwidth = { knn = [5, 10, 20] }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub kernel: Kernel,
    pub semimetric: SemiMetric,
    pub bandwidth: BandwidthRule,
    pub cv: CvOptions,
    /// Number of equispaced points of the `u`-grid on which `τ₀` is sampled.
    pub tau_grid_points: usize,
    /// Lower bound applied to conditional density estimates.
    pub density_floor: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            kernel: Kernel::Quadratic,
            semimetric: SemiMetric::L2,
            bandwidth: BandwidthRule::default(),
            cv: CvOptions::default(),
            tau_grid_points: 101,
            density_floor: 1e-8,
        }
    }
}

impl EstimatorConfig {
    pub fn with_bandwidth(mut self, bandwidth: BandwidthRule) -> Self {
        self.bandwidth = bandwidth;
        self
    }

    pub fn with_semimetric(mut self, semimetric: SemiMetric) -> Self {
        self.semimetric = semimetric;
        self
    }

    pub fn with_kernel(mut self, kernel: Kernel) -> Self {
        self.kernel = kernel;
        self
    }
}
