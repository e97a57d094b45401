//! Kernels supported on `[0, 1]`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Asymmetric kernel `K: [0, ∞) → [0, ∞)` vanishing outside `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// `K(u) = 3/4 (1 - u²)` on `[0, 1]`.
    #[default]
    Quadratic,
    /// `K(u) = 1` on `[0, 1]`; unlike the quadratic kernel it keeps `K(1) > 0`.
    Uniform,
}

impl Kernel {
    /// `K(u)`; exactly zero for `u > 1`.
    pub fn eval(&self, u: f64) -> Result<f64> {
        if u < 0.0 || u.is_nan() {
            return Err(Error::NegativeArgument(u));
        }
        Ok(self.eval_unchecked(u))
    }

    /// `K(u)` for `u` known to be nonnegative.
    #[inline]
    pub(crate) fn eval_unchecked(&self, u: f64) -> f64 {
        if u > 1.0 {
            return 0.0;
        }
        match self {
            Kernel::Quadratic => 0.75 * (1.0 - u * u),
            Kernel::Uniform => 1.0,
        }
    }

    /// First derivative `K'(u)` on `[0, 1]`.
    pub fn derivative(&self, u: f64) -> f64 {
        match self {
            Kernel::Quadratic => -1.5 * u,
            Kernel::Uniform => 0.0,
        }
    }

    /// `(K^j)'(u) = j K^{j-1}(u) K'(u)` on `[0, 1]`.
    pub fn power_derivative(&self, j: u32, u: f64) -> f64 {
        if j == 0 {
            return 0.0;
        }
        j as f64 * self.eval_unchecked(u).powi(j as i32 - 1) * self.derivative(u)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Quadratic => "quadratic",
            Kernel::Uniform => "uniform",
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "quadratic" => Ok(Kernel::Quadratic),
            "uniform" => Ok(Kernel::Uniform),
            other => Err(Error::InvalidParameter(format!("unknown kernel `{other}`"))),
        }
    }
}
