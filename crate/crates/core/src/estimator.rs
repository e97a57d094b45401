//! MAR-weighted kernel estimator of `m_ψ(x, y) = E[ψ_y(Y) | X = x]`.
//!
//! With `Δ_k(x) = K(d(x, X_{t_k}) / h)`,
//!
//! ```text
//! m̂_ψ(x, y) = Σ_k ζ_k ψ_y(Y_k) Δ_k(x) / Σ_k ζ_k Δ_k(x)
//! ```
//!
//! All sums run over the dataset in its stored order. [`LocalFit`] holds the
//! distances and weights at one query and answers every pointwise question
//! (regression, conditional CDF and quantile, small-ball and missingness
//! estimates, conditional variance). The free functions are one-shot
//! wrappers around it.

use serde::{Deserialize, Serialize};

use crate::bandwidth::{self, BandwidthChoice};
use crate::config::EstimatorConfig;
use crate::error::{Error, Result};
use crate::funcdata::{Curve, FunctionalDataset};
use crate::kernel::Kernel;
use crate::metric::MetricIndex;

/// The `ψ_y` transform of the response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiFamily {
    /// `ψ(v) = v`: the regression operator.
    Identity,
    /// `ψ_y(v) = 1{v ≤ y}`: the conditional CDF at `y`.
    IndicatorLeq(f64),
}

impl PsiFamily {
    #[inline]
    pub fn apply(&self, v: f64) -> f64 {
        match *self {
            PsiFamily::Identity => v,
            PsiFamily::IndicatorLeq(y) => {
                if v <= y {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// A function sampled on an increasing abscissa.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledFunction {
    pub u: Vec<f64>,
    pub values: Vec<f64>,
}

impl SampledFunction {
    /// General trapezoid rule for `∫ g(u) f(u) du` over the sample abscissae.
    pub fn integrate_against(&self, g: impl Fn(f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for i in 1..self.u.len() {
            let (a, b) = (self.u[i - 1], self.u[i]);
            acc += 0.5 * (b - a) * (g(a) * self.values[i - 1] + g(b) * self.values[i]);
        }
        acc
    }
}

/// `n` equispaced points on `[0, 1]`, the last one exactly 1.
pub fn unit_grid(n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n)
        .map(|i| if i + 1 == n { 1.0 } else { i as f64 / (n - 1) as f64 })
        .collect()
}

/// Kernel weights and distances at one query curve.
#[derive(Debug, Clone)]
pub struct LocalFit<'a> {
    responses: &'a [Option<f64>],
    distances: Vec<f64>,
    weights: Vec<f64>,
    h: f64,
    kernel: Kernel,
    choice: Option<BandwidthChoice>,
}

impl<'a> LocalFit<'a> {
    pub fn new(responses: &'a [Option<f64>], distances: Vec<f64>, h: f64, kernel: Kernel) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidParameter(format!("bandwidth must be > 0, got {h}")));
        }
        if responses.len() != distances.len() {
            return Err(Error::InvalidParameter("one distance per observation required".into()));
        }
        if let Some(d) = distances.iter().find(|d| d.is_nan() || **d < 0.0) {
            return Err(Error::NegativeArgument(*d));
        }
        let weights = distances.iter().map(|d| kernel.eval_unchecked(d / h)).collect();
        Ok(Self { responses, distances, weights, h, kernel, choice: None })
    }

    /// Builds a fit from arbitrary nonnegative weights `Δ_k`.
    pub fn from_weights(responses: &'a [Option<f64>], weights: Vec<f64>, h: f64) -> Result<Self> {
        if responses.len() != weights.len() {
            return Err(Error::InvalidParameter("one weight per observation required".into()));
        }
        let distances = vec![f64::NAN; weights.len()];
        Ok(Self { responses, distances, weights, h, kernel: Kernel::Quadratic, choice: None })
    }

    /// Same query and data at another bandwidth.
    pub fn with_bandwidth(&self, h: f64) -> Result<Self> {
        Self::new(self.responses, self.distances.clone(), h, self.kernel)
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn n(&self) -> usize {
        self.responses.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn responses(&self) -> &[Option<f64>] {
        self.responses
    }

    /// The κ-NN selection that produced `h`, if any.
    pub fn bandwidth_choice(&self) -> Option<&BandwidthChoice> {
        self.choice.as_ref()
    }

    /// `Σ ζ_k Δ_k`.
    pub fn observed_weight(&self) -> f64 {
        let mut den = 0.0;
        for (y, w) in self.responses.iter().zip(&self.weights) {
            if y.is_some() {
                den += *w;
            }
        }
        den
    }

    pub fn regress(&self, psi: PsiFamily) -> Result<f64> {
        let (mut num, mut den) = (0.0, 0.0);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (y, w) in self.responses.iter().zip(&self.weights) {
            if let Some(y) = y {
                let v = psi.apply(*y);
                num += v * w;
                den += w;
                if *w > 0.0 {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
        if den > 0.0 {
            // a weighted mean of equal values is that value; rounding must not move it
            Ok(if lo == hi { lo } else { (num / den).clamp(lo, hi) })
        } else {
            Err(Error::EmptyNeighborhood { h: self.h })
        }
    }

    pub fn cdf(&self, y: f64) -> Result<f64> {
        Ok(self.regress(PsiFamily::IndicatorLeq(y))?.clamp(0.0, 1.0))
    }

    /// Observed responses carrying positive weight, sorted and deduplicated.
    pub fn neighborhood_responses(&self) -> Vec<f64> {
        let mut ys: Vec<f64> = self
            .responses
            .iter()
            .zip(&self.weights)
            .filter_map(|(y, w)| y.filter(|_| *w > 0.0))
            .collect();
        ys.sort_by(f64::total_cmp);
        ys.dedup();
        ys
    }

    /// Smallest neighbourhood response `y` with `F̂(y | x) ≥ α`.
    ///
    /// Searches with [`cdf`](Self::cdf) itself, so the returned value and the
    /// CDF can never disagree through rounding.
    pub fn quantile(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("quantile level must be in (0,1), got {alpha}")));
        }
        let ys = self.neighborhood_responses();
        if ys.is_empty() {
            return Err(Error::EmptyNeighborhood { h: self.h });
        }
        let (mut lo, mut hi) = (0usize, ys.len() - 1);
        if self.cdf(ys[hi])? < alpha {
            // only reachable through rounding of a total mass of one
            return Ok(ys[hi]);
        }
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if self.cdf(ys[mid])? >= alpha {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        Ok(ys[lo])
    }

    /// `p̂(x) = Σ ζ_k Δ_k / Σ Δ_k`.
    pub fn p_hat(&self) -> Result<f64> {
        let (mut num, mut den) = (0.0, 0.0);
        for (y, w) in self.responses.iter().zip(&self.weights) {
            if y.is_some() {
                num += *w;
            }
            den += *w;
        }
        if den > 0.0 {
            Ok(num / den)
        } else {
            Err(Error::EmptyNeighborhood { h: self.h })
        }
    }

    /// `F̂_x(u) = #{k : d(x, X_k) ≤ u} / n`.
    pub fn fx(&self, u: f64) -> f64 {
        let count = self.distances.iter().filter(|&&d| d <= u).count();
        count as f64 / self.distances.len() as f64
    }

    /// `τ̂₀(u) = F̂_x(u h) / F̂_x(h)` on `u_grid`, at bandwidth `h`.
    pub fn tau0_at(&self, h: f64, u_grid: &[f64]) -> Result<SampledFunction> {
        let base = self.fx(h);
        if base <= 0.0 {
            return Err(Error::DegenerateBall { h });
        }
        let values = u_grid
            .iter()
            .map(|&u| if u == 1.0 { 1.0 } else { self.fx(u * h) / base })
            .collect();
        Ok(SampledFunction { u: u_grid.to_vec(), values })
    }

    pub fn tau0(&self, u_grid: &[f64]) -> Result<SampledFunction> {
        self.tau0_at(self.h, u_grid)
    }

    /// Kernel-weighted conditional second moment of `ψ_y(Y) - m̂_ψ(x, y)`.
    pub fn w2bar(&self, psi: PsiFamily) -> Result<f64> {
        let m = self.regress(psi)?;
        let (mut num, mut den) = (0.0, 0.0);
        for (y, w) in self.responses.iter().zip(&self.weights) {
            if let Some(y) = y {
                let r = psi.apply(*y) - m;
                num += w * (r * r);
                den += w;
            }
        }
        Ok(num / den)
    }

    /// `F̂(1 - F̂)`, the indicator-ψ shortcut of [`w2bar`](Self::w2bar).
    pub fn w2bar_indicator(&self, y: f64) -> Result<f64> {
        let f = self.cdf(y)?;
        Ok(f * (1.0 - f))
    }

    /// `(F̂(y + h_y | x) - F̂(y - h_y | x)) / (2 h_y)`, floored at `floor`.
    pub fn cond_density(&self, y: f64, h_y: f64, floor: f64) -> Result<f64> {
        if !(h_y.is_finite() && h_y > 0.0) {
            return Err(Error::InvalidParameter(format!("density bandwidth must be > 0, got {h_y}")));
        }
        let g = (self.cdf(y + h_y)? - self.cdf(y - h_y)?) / (2.0 * h_y);
        Ok(g.max(floor))
    }

    /// Rule-of-thumb response bandwidth `1.06 σ̂ n_eff^{-1/5}` from the
    /// weighted neighbourhood responses.
    pub fn response_bandwidth(&self) -> Result<f64> {
        let m = self.regress(PsiFamily::Identity)?;
        let (mut s1, mut s2, mut var) = (0.0, 0.0, 0.0);
        for (y, w) in self.responses.iter().zip(&self.weights) {
            if let Some(y) = y {
                s1 += w;
                s2 += w * w;
                var += w * (y - m) * (y - m);
            }
        }
        let sd = (var / s1).sqrt();
        let n_eff = s1 * s1 / s2;
        let h = 1.06 * sd * n_eff.powf(-0.2);
        Ok(h.max(1e-12 * (1.0 + m.abs())))
    }
}

/// `M_j = K^j(1) - ∫_0^1 (K^j)'(u) τ₀(u) du`, `j = 1, 2`, by trapezoid on the
/// abscissae of `tau0`.
pub fn estimate_moments(kernel: Kernel, tau0: &SampledFunction) -> (f64, f64) {
    let k1 = kernel.eval_unchecked(1.0);
    let m1 = k1 - tau0.integrate_against(|u| kernel.power_derivative(1, u));
    let m2 = k1 * k1 - tau0.integrate_against(|u| kernel.power_derivative(2, u));
    (m1, m2)
}

/// A dataset prepared for repeated queries under one configuration.
#[derive(Debug, Clone)]
pub struct Estimator<'a> {
    ds: &'a FunctionalDataset,
    cfg: EstimatorConfig,
    index: MetricIndex,
    responses: Vec<Option<f64>>,
}

impl<'a> Estimator<'a> {
    pub fn new(ds: &'a FunctionalDataset, cfg: &EstimatorConfig) -> Result<Self> {
        let index = MetricIndex::build(ds, cfg.semimetric)?;
        Self::with_index(ds, cfg, index)
    }

    /// Uses a prebuilt (possibly compressed) distance index.
    pub fn with_index(ds: &'a FunctionalDataset, cfg: &EstimatorConfig, index: MetricIndex) -> Result<Self> {
        Self::with_responses(ds, cfg, index, ds.responses())
    }

    /// Uses `responses` in place of the dataset's own, e.g. to apply a
    /// missingness mask without copying the curves.
    pub fn with_responses(
        ds: &'a FunctionalDataset,
        cfg: &EstimatorConfig,
        index: MetricIndex,
        responses: Vec<Option<f64>>,
    ) -> Result<Self> {
        if index.len() != ds.len() || index.metric() != cfg.semimetric {
            return Err(Error::InvalidParameter("distance index does not match dataset/config".into()));
        }
        if responses.len() != ds.len() {
            return Err(Error::InvalidParameter("one response slot per observation is required".into()));
        }
        Ok(Self { ds, cfg: cfg.clone(), index, responses })
    }

    pub fn dataset(&self) -> &FunctionalDataset {
        self.ds
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.cfg
    }

    pub fn index(&self) -> &MetricIndex {
        &self.index
    }

    pub fn responses(&self) -> &[Option<f64>] {
        &self.responses
    }

    pub fn distances(&self, x: &Curve) -> Result<Vec<f64>> {
        self.index.distances_to(x)
    }

    /// Distances, bandwidth and weights at `x`.
    pub fn at(&self, x: &Curve) -> Result<LocalFit<'_>> {
        let dx = self.index.distances_to(x)?;
        self.at_distances(dx)
    }

    pub fn at_distances(&self, dx: Vec<f64>) -> Result<LocalFit<'_>> {
        let choice = bandwidth::select(
            &self.index,
            &self.responses,
            &dx,
            &self.cfg.bandwidth,
            self.cfg.kernel,
            &self.cfg.cv,
        )?;
        let mut fit = LocalFit::new(&self.responses, dx, choice.h, self.cfg.kernel)?;
        fit.choice = Some(choice);
        Ok(fit)
    }

    /// Fit at `x` with an explicit bandwidth.
    pub fn at_with_bandwidth(&self, x: &Curve, h: f64) -> Result<LocalFit<'_>> {
        LocalFit::new(&self.responses, self.index.distances_to(x)?, h, self.cfg.kernel)
    }
}

pub fn regress(ds: &FunctionalDataset, x: &Curve, psi: PsiFamily, cfg: &EstimatorConfig) -> Result<f64> {
    Estimator::new(ds, cfg)?.at(x)?.regress(psi)
}

pub fn estimate_cdf(ds: &FunctionalDataset, x: &Curve, y: f64, cfg: &EstimatorConfig) -> Result<f64> {
    Estimator::new(ds, cfg)?.at(x)?.cdf(y)
}

pub fn estimate_quantile(ds: &FunctionalDataset, x: &Curve, alpha: f64, cfg: &EstimatorConfig) -> Result<f64> {
    Estimator::new(ds, cfg)?.at(x)?.quantile(alpha)
}

pub fn estimate_p(ds: &FunctionalDataset, x: &Curve, cfg: &EstimatorConfig) -> Result<f64> {
    Estimator::new(ds, cfg)?.at(x)?.p_hat()
}

/// `F̂_x(u)`; needs no bandwidth.
pub fn estimate_fx(ds: &FunctionalDataset, x: &Curve, u: f64, cfg: &EstimatorConfig) -> Result<f64> {
    let dx = MetricIndex::build(ds, cfg.semimetric)?.distances_to(x)?;
    Ok(dx.iter().filter(|&&d| d <= u).count() as f64 / dx.len() as f64)
}

pub fn estimate_tau0(
    ds: &FunctionalDataset,
    x: &Curve,
    h: f64,
    u_grid: &[f64],
    cfg: &EstimatorConfig,
) -> Result<SampledFunction> {
    Estimator::new(ds, cfg)?.at_with_bandwidth(x, h)?.tau0(u_grid)
}

pub fn estimate_w2bar(ds: &FunctionalDataset, x: &Curve, psi: PsiFamily, cfg: &EstimatorConfig) -> Result<f64> {
    Estimator::new(ds, cfg)?.at(x)?.w2bar(psi)
}

pub fn estimate_cond_density(
    ds: &FunctionalDataset,
    x: &Curve,
    y: f64,
    cfg: &EstimatorConfig,
    h_y: f64,
) -> Result<f64> {
    Estimator::new(ds, cfg)?.at(x)?.cond_density(y, h_y, cfg.density_floor)
}
