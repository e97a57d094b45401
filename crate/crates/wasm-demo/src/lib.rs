//! Browser demo: simulate a sampled functional time series with missing
//! responses, then estimate the regression, conditional distribution and
//! confidence intervals at a curve picked with a slider.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use ftkreg::estimator::{Estimator, PsiFamily};
use ftkreg::inference::{asymptotic_interval, bootstrap_interval, WeightLaw};
use ftkreg::simulate::{
    calibrate_mar, generate_with_latent, response_value, CurveModel, Lifter, MarModel, SimSpec,
};
use ftkreg::{EstimatorConfig, FunctionalDataset, SemiMetric};

const PILOT_DRAWS: usize = 20_000;
const QUANTILE_LEVELS: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];

pub fn parse_model(name: &str) -> Option<CurveModel> {
    match name {
        "legendre" => Some(CurveModel::LegendreLift),
        "sine" => Some(CurveModel::SineShape),
        _ => None,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub n: usize,
    pub observed: usize,
    pub mar_offset: Option<f64>,
    pub t: Vec<f64>,
    pub z: Vec<f64>,
    pub has_response: Vec<bool>,
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub z: f64,
    pub truth: f64,
    pub estimate: f64,
    pub h: f64,
    pub kappa: Option<usize>,
    pub in_ball: usize,
    pub p_hat: f64,
    pub fx: f64,
    pub asymptotic: Interval,
    pub bootstrap: Option<Interval>,
    /// Step points `(y, F̂(y | x))` at the neighbourhood responses.
    pub cdf: Vec<(f64, f64)>,
    pub quantiles: Vec<(f64, f64)>,
}

/// A simulated sample and the estimator settings matched to its model.
pub struct Demo {
    spec: SimSpec,
    dataset: FunctionalDataset,
    latent: Vec<f64>,
    cfg: EstimatorConfig,
}

impl Demo {
    pub fn simulate(model: CurveModel, horizon: f64, delta: f64, mar_rate: f64, seed: u64) -> ftkreg::Result<Self> {
        let base = match model {
            CurveModel::LegendreLift => SimSpec::legendre(horizon, delta, seed),
            CurveModel::SineShape => SimSpec::sine((horizon / delta).round() as usize, delta, seed),
        };
        let mar = calibrate_mar(model, &base.grid, &base.ou, mar_rate, PILOT_DRAWS, seed)?;
        let spec = base.with_mar(mar);
        let sim = generate_with_latent(&spec)?;
        let metric = match model {
            CurveModel::LegendreLift => SemiMetric::L2Deriv(2),
            CurveModel::SineShape => SemiMetric::L2Deriv(1),
        };
        Ok(Self {
            spec,
            dataset: sim.dataset,
            latent: sim.latent,
            cfg: EstimatorConfig::default().with_semimetric(metric),
        })
    }

    pub fn summary(&self) -> Summary {
        let obs = self.dataset.observations();
        Summary {
            n: obs.len(),
            observed: self.dataset.n_observed(),
            mar_offset: match self.spec.mar {
                MarModel::Expit { offset } => Some(offset),
                MarModel::None => None,
            },
            t: obs.iter().map(|o| o.t).collect(),
            z: self.latent.clone(),
            has_response: obs.iter().map(|o| o.y.is_some()).collect(),
            grid: self.dataset.grid().points(),
        }
    }

    pub fn curve(&self, z: f64) -> ftkreg::Result<Vec<f64>> {
        Ok(Lifter::new(self.spec.model, self.spec.grid).lift(z)?.into_values())
    }

    /// Estimates at the lifted curve of `z`. A bootstrap interval is added
    /// when `replicates` is nonzero.
    pub fn fit(&self, z: f64, level: f64, replicates: usize, seed: u64) -> ftkreg::Result<FitReport> {
        let x = Lifter::new(self.spec.model, self.spec.grid).lift(z)?;
        let truth = response_value(&x, self.spec.response)?;
        let est = Estimator::new(&self.dataset, &self.cfg)?;
        let fit = est.at(&x)?;
        let risk = 1.0 - level;
        let tau = self.cfg.tau_grid_points;
        let ci = asymptotic_interval(&fit, PsiFamily::Identity, risk, tau)?;
        let bootstrap = if replicates > 0 {
            let b = bootstrap_interval(&fit, PsiFamily::Identity, risk, replicates, WeightLaw::UnitExponential, seed, tau)?;
            Some(Interval { lower: b.lower, upper: b.upper })
        } else {
            None
        };
        let ys = fit.neighborhood_responses();
        let cdf = ys.iter().map(|&y| Ok((y, fit.cdf(y)?))).collect::<ftkreg::Result<_>>()?;
        let quantiles = QUANTILE_LEVELS.iter().map(|&a| Ok((a, fit.quantile(a)?))).collect::<ftkreg::Result<_>>()?;
        Ok(FitReport {
            z,
            truth,
            estimate: ci.point,
            h: fit.h(),
            kappa: fit.bandwidth_choice().and_then(|c| c.kappa),
            in_ball: fit.weights().iter().filter(|&&w| w > 0.0).count(),
            p_hat: ci.components.p,
            fx: ci.components.fx,
            asymptotic: Interval { lower: ci.lower, upper: ci.upper },
            bootstrap,
            cdf,
            quantiles,
        })
    }
}

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Session(Demo);

#[wasm_bindgen]
impl Session {
    /// `model` is `"legendre"` or `"sine"`.
    #[wasm_bindgen(constructor)]
    pub fn new(model: &str, horizon: f64, delta: f64, mar_rate: f64, seed: u32) -> Result<Session, JsError> {
        let model = parse_model(model).ok_or_else(|| JsError::new(&format!("unknown model `{model}`")))?;
        Demo::simulate(model, horizon, delta, mar_rate, seed.into()).map(Session).map_err(js_err)
    }

    /// JSON with the sampling instants, latent path, response flags and grid.
    pub fn summary(&self) -> Result<String, JsError> {
        serde_json::to_string(&self.0.summary()).map_err(js_err)
    }

    pub fn curve(&self, z: f64) -> Result<Vec<f64>, JsError> {
        self.0.curve(z).map_err(js_err)
    }

    /// JSON report of the fit at the curve of `z`; `replicates = 0` skips
    /// the bootstrap.
    pub fn fit(&self, z: f64, level: f64, replicates: u32, seed: u32) -> Result<String, JsError> {
        let report = self.0.fit(z, level, replicates as usize, seed.into()).map_err(js_err)?;
        serde_json::to_string(&report).map_err(js_err)
    }
}
