//! Confidence intervals for `m_ψ(x, y)` and for conditional quantiles.
//!
//! The asymptotic interval is `m̂ ± z_{1-α/2} σ̂ / sqrt(n F̂_x(h))` with
//!
//! ```text
//! σ̂² = M̂₂ W̄̂₂ / (M̂₁² p̂(x))
//! ```
//!
//! The exchangeable bootstrap replaces `z_{1-α/2} σ̂` by an order statistic of
//! the multiplier statistic built from the centred summands of the
//! estimator's leading term.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::config::EstimatorConfig;
use crate::error::{Error, Result};
use crate::estimator::{estimate_moments, unit_grid, Estimator, LocalFit, PsiFamily, SampledFunction};
use crate::funcdata::{Curve, FunctionalDataset};
use crate::rng;

/// Law of the exchangeable bootstrap multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightLaw {
    /// i.i.d. Exp(1): mean 1, variance 1, strictly positive.
    #[default]
    UnitExponential,
    /// Multinomial(n; 1/n, ..., 1/n) counts, summing to n.
    Multinomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    Asymptotic,
    Bootstrap { replicates: usize, law: WeightLaw },
}

impl CiMethod {
    pub fn name(&self) -> &'static str {
        match self {
            CiMethod::Asymptotic => "asymptotic",
            CiMethod::Bootstrap { .. } => "bootstrap",
        }
    }
}

/// A confidence-interval query. `risk` is α: the interval has level `1 - α`.
#[derive(Debug, Clone, PartialEq)]
pub struct CIRequest {
    pub x: Curve,
    pub psi: PsiFamily,
    pub risk: f64,
    pub method: CiMethod,
}

/// Plug-in ingredients of the asymptotic variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceComponents {
    pub m1: f64,
    pub m2: f64,
    /// `F̂_x(h)`.
    pub fx: f64,
    pub p: f64,
    pub w2bar: f64,
    pub tau0: SampledFunction,
}

impl VarianceComponents {
    /// `σ̂ = sqrt(M̂₂ W̄̂₂ / p̂) / M̂₁`, the standard deviation of
    /// `sqrt(n F̂_x(h)) (m̂ - m)`.
    pub fn sigma(&self) -> f64 {
        (self.m2 * self.w2bar / self.p).sqrt() / self.m1
    }

    /// `n F̂_x(h)`, the effective number of curves in the ball.
    pub fn ball_count(&self, n: usize) -> f64 {
        n as f64 * self.fx
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CIResult {
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub components: VarianceComponents,
    pub method: String,
    /// The critical value multiplying the standard error (`z_{1-α/2}` or the
    /// bootstrap `z*`).
    pub quantile_used: f64,
    pub h: f64,
}

impl CIResult {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.upper - self.lower)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

fn check_risk(risk: f64) -> Result<()> {
    if risk > 0.0 && risk < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("risk level must be in (0,1), got {risk}")))
    }
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Estimates every variance ingredient at the fit's bandwidth.
pub fn variance_components(fit: &LocalFit<'_>, psi: PsiFamily, tau_points: usize) -> Result<VarianceComponents> {
    let fx = fit.fx(fit.h());
    if fx <= 0.0 {
        return Err(Error::DegenerateBall { h: fit.h() });
    }
    let p = fit.p_hat()?;
    if p <= 0.0 {
        return Err(Error::ZeroMissingness);
    }
    let tau0 = fit.tau0(&unit_grid(tau_points))?;
    let (m1, m2) = estimate_moments(fit.kernel(), &tau0);
    let w2bar = fit.w2bar(psi)?;
    Ok(VarianceComponents { m1, m2, fx, p, w2bar, tau0 })
}

/// Normal-approximation interval from a prepared fit.
pub fn asymptotic_interval(fit: &LocalFit<'_>, psi: PsiFamily, risk: f64, tau_points: usize) -> Result<CIResult> {
    check_risk(risk)?;
    let components = variance_components(fit, psi, tau_points)?;
    let point = fit.regress(psi)?;
    let z = normal_quantile(1.0 - risk / 2.0);
    let half = z * components.sigma() / components.ball_count(fit.n()).sqrt();
    Ok(CIResult {
        point,
        lower: point - half,
        upper: point + half,
        components,
        method: "asymptotic".into(),
        quantile_used: z,
        h: fit.h(),
    })
}

/// Interval for the conditional quantile `q_α(x)` from a prepared fit.
///
/// Half-width `z σ̂_q / sqrt(n F̂_x(h))` with `W̄₂ = α(1-α)` and the delta
/// method factor `1 / ĝ(q̂ | x)`.
pub fn quantile_interval(
    fit: &LocalFit<'_>,
    alpha_q: f64,
    risk: f64,
    tau_points: usize,
    density_floor: f64,
    h_y: Option<f64>,
) -> Result<CIResult> {
    check_risk(risk)?;
    let q = fit.quantile(alpha_q)?;
    let mut components = variance_components(fit, PsiFamily::IndicatorLeq(q), tau_points)?;
    components.w2bar = alpha_q * (1.0 - alpha_q);
    let h_y = match h_y {
        Some(h) => h,
        None => fit.response_bandwidth()?,
    };
    let g = fit.cond_density(q, h_y, density_floor)?;
    if g <= density_floor {
        return Err(Error::DensityFloorHit { floor: density_floor });
    }
    let z = normal_quantile(1.0 - risk / 2.0);
    let half = z * components.sigma() / components.ball_count(fit.n()).sqrt() / g;
    Ok(CIResult {
        point: q,
        lower: q - half,
        upper: q + half,
        components,
        method: "asymptotic".into(),
        quantile_used: z,
        h: fit.h(),
    })
}

/// One vector of bootstrap multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapWeights {
    pub w: Vec<f64>,
    pub law: WeightLaw,
}

impl BootstrapWeights {
    pub fn draw(n: usize, law: WeightLaw, rng: &mut rng::Rng) -> Self {
        use rand::Rng as _;
        use rand_distr::{Distribution, Exp1};
        let w = match law {
            WeightLaw::UnitExponential => (0..n).map(|_| Exp1.sample(rng)).collect(),
            WeightLaw::Multinomial => {
                let mut counts = vec![0.0; n];
                for _ in 0..n {
                    counts[rng.random_range(0..n)] += 1.0;
                }
                counts
            }
        };
        Self { w, law }
    }
}

/// Centred summands `ξ̂_k` of the leading term, and `p̂` for normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapTerms {
    pub xi: Vec<f64>,
    pub p_hat: f64,
}

impl BootstrapTerms {
    /// `η_k = sqrt(F̂_x(h)/n) ζ_k (ψ(Y_k) - m̂) Δ_k / mean(Δ)`, centred by its
    /// mean over `k` so that `Σ ξ̂_k = 0`.
    pub fn new(fit: &LocalFit<'_>, psi: PsiFamily) -> Result<Self> {
        let n = fit.n();
        let m = fit.regress(psi)?;
        let fx = fit.fx(fit.h());
        let p_hat = fit.p_hat()?;
        if p_hat <= 0.0 {
            return Err(Error::ZeroMissingness);
        }
        let mean_delta = fit.weights().iter().sum::<f64>() / n as f64;
        let scale = (fx / n as f64).sqrt() / mean_delta;
        let mut xi: Vec<f64> = fit
            .responses()
            .iter()
            .zip(fit.weights())
            .map(|(y, w)| match y {
                Some(y) => scale * (psi.apply(*y) - m) * w,
                None => 0.0,
            })
            .collect();
        let mean = xi.iter().sum::<f64>() / n as f64;
        xi.iter_mut().for_each(|v| *v -= mean);
        Ok(Self { xi, p_hat })
    }

    /// `Ŝ* = Σ_k (W_k - W̄) ξ̂_k / p̂`.
    pub fn statistic(&self, weights: &BootstrapWeights) -> Result<f64> {
        if weights.w.len() != self.xi.len() {
            return Err(Error::InvalidParameter(format!(
                "{} bootstrap weights for {} observations",
                weights.w.len(),
                self.xi.len()
            )));
        }
        let wbar = weights.w.iter().sum::<f64>() / weights.w.len() as f64;
        let mut acc = 0.0;
        for (w, xi) in weights.w.iter().zip(&self.xi) {
            acc += (w - wbar) * xi;
        }
        Ok(acc / self.p_hat)
    }
}

pub fn bootstrap_statistic(fit: &LocalFit<'_>, psi: PsiFamily, weights: &BootstrapWeights) -> Result<f64> {
    BootstrapTerms::new(fit, psi)?.statistic(weights)
}

/// Smallest `z` with `#{ℓ : |Ŝ*_ℓ| ≤ z} / B ≥ 1 - α`.
pub fn bootstrap_critical_value(abs_stats: &mut [f64], risk: f64) -> f64 {
    abs_stats.sort_by(f64::total_cmp);
    let b = abs_stats.len();
    let rank = ((1.0 - risk) * b as f64 - 1e-9).ceil().max(1.0) as usize;
    abs_stats[rank.min(b) - 1]
}

/// Exchangeable-bootstrap interval from a prepared fit.
pub fn bootstrap_interval(
    fit: &LocalFit<'_>,
    psi: PsiFamily,
    risk: f64,
    replicates: usize,
    law: WeightLaw,
    seed: u64,
    tau_points: usize,
) -> Result<CIResult> {
    check_risk(risk)?;
    if replicates < 100 {
        return Err(Error::InvalidParameter(format!("need at least 100 bootstrap replicates, got {replicates}")));
    }
    let components = variance_components(fit, psi, tau_points)?;
    let terms = BootstrapTerms::new(fit, psi)?;
    let n = fit.n();
    let draw = |l: usize| -> Result<f64> {
        let mut r = rng::stream(seed, rng::tag::BOOTSTRAP, l as u64);
        Ok(terms.statistic(&BootstrapWeights::draw(n, law, &mut r))?.abs())
    };
    #[cfg(feature = "parallel")]
    let stats: Result<Vec<f64>> = {
        use rayon::prelude::*;
        (0..replicates).into_par_iter().map(draw).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let stats: Result<Vec<f64>> = (0..replicates).map(draw).collect();
    let mut stats = stats?;
    let z = bootstrap_critical_value(&mut stats, risk);
    let point = fit.regress(psi)?;
    let half = z / components.ball_count(n).sqrt();
    Ok(CIResult {
        point,
        lower: point - half,
        upper: point + half,
        components,
        method: "bootstrap".into(),
        quantile_used: z,
        h: fit.h(),
    })
}

pub fn ci_asymptotic(ds: &FunctionalDataset, req: &CIRequest, cfg: &EstimatorConfig) -> Result<CIResult> {
    let est = Estimator::new(ds, cfg)?;
    let fit = est.at(&req.x)?;
    asymptotic_interval(&fit, req.psi, req.risk, cfg.tau_grid_points)
}

pub fn ci_quantile(
    ds: &FunctionalDataset,
    x: &Curve,
    alpha_q: f64,
    risk: f64,
    cfg: &EstimatorConfig,
) -> Result<CIResult> {
    let est = Estimator::new(ds, cfg)?;
    let fit = est.at(x)?;
    quantile_interval(&fit, alpha_q, risk, cfg.tau_grid_points, cfg.density_floor, None)
}

pub fn ci_bootstrap(ds: &FunctionalDataset, req: &CIRequest, cfg: &EstimatorConfig, seed: u64) -> Result<CIResult> {
    let (replicates, law) = match req.method {
        CiMethod::Bootstrap { replicates, law } => (replicates, law),
        CiMethod::Asymptotic => (1000, WeightLaw::UnitExponential),
    };
    let est = Estimator::new(ds, cfg)?;
    let fit = est.at(&req.x)?;
    bootstrap_interval(&fit, req.psi, req.risk, replicates, law, seed, cfg.tau_grid_points)
}

/// Dispatches on the request's method.
pub fn confidence_interval(
    ds: &FunctionalDataset,
    req: &CIRequest,
    cfg: &EstimatorConfig,
    seed: u64,
) -> Result<CIResult> {
    match req.method {
        CiMethod::Asymptotic => ci_asymptotic(ds, req, cfg),
        CiMethod::Bootstrap { .. } => ci_bootstrap(ds, req, cfg, seed),
    }
}
