//! Continuous-time versus discrete-time estimation on the Legendre-lift
//! model.
//!
//! Each replicate simulates one path on `[0, T]` at mesh `delta`. The
//! continuous estimator uses every observation, the discrete one only those
//! at `t = 1, 2, ..., T`. Both estimate `m(x)` at a fresh curve `x` drawn
//! from the stationary law, and the squared errors are summarised per
//! `(T, MAR rate)` cell. All MAR rates and horizons of one replicate share
//! the same latent path.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::summary::{summarize_se, SeSummary};
use super::{estimate_with_fallback, par_map, real, write_meta};
use crate::bandwidth::{BandwidthRule, CvOptions};
use crate::config::EstimatorConfig;
use crate::error::{Error, Result};
use crate::estimator::Estimator;
use crate::funcdata::{Curve, FunctionalDataset, Grid};
use crate::metric::{MetricIndex, SemiMetric};
use crate::rng::{self, tag};
use crate::simulate::{
    calibrate_mar, generate, mar_indicators, response_value, stationary_curves, CurveModel, MarModel,
    NoiseModel, OuParams, ResponseOperator, SimSpec,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sim1Config {
    #[serde(rename = "T_values")]
    pub t_values: Vec<f64>,
    /// Target fractions of missing responses; 0 means complete data.
    pub mar_rates: Vec<f64>,
    pub delta: f64,
    #[serde(rename = "M")]
    pub replications: usize,
    pub seed: u64,
    /// Spacing of the discrete-time observations.
    pub discrete_step: f64,
    pub grid_points: usize,
    pub ou: OuParams,
    pub noise: NoiseModel,
    pub response: ResponseOperator,
    /// Stationary draws used to calibrate each MAR offset.
    pub pilot_draws: usize,
    pub continuous: EstimatorConfig,
    pub discrete: EstimatorConfig,
    /// Relative tolerance of the low-rank distance index; `None` keeps full
    /// curves.
    pub compress_tol: Option<f64>,
}

impl Default for Sim1Config {
    fn default() -> Self {
        let base = EstimatorConfig::default().with_semimetric(SemiMetric::L2Deriv(2));
        Self {
            t_values: vec![50.0, 200.0, 1000.0],
            mar_rates: vec![0.2, 0.4],
            delta: 0.005,
            replications: 100,
            seed: 20_240_601,
            discrete_step: 1.0,
            grid_points: 400,
            ou: OuParams::default(),
            noise: NoiseModel::WienerDiff { lag: 1.0 },
            response: ResponseOperator::IntegralSquare,
            pilot_draws: 100_000,
            continuous: EstimatorConfig {
                bandwidth: BandwidthRule::Knn(vec![50, 100, 200, 400, 800, 1600]),
                cv: CvOptions { exclusion: 200, max_points: Some(50), ..CvOptions::default() },
                ..base.clone()
            },
            discrete: base,
            compress_tol: Some(1e-10),
        }
    }
}

impl Sim1Config {
    fn steps(&self, span: f64, what: &str) -> Result<usize> {
        let r = span / self.delta;
        let k = r.round();
        if !(k >= 1.0 && (r - k).abs() <= 1e-6 * k) {
            return Err(Error::InvalidParameter(format!("{what} = {span} is not a multiple of delta = {}", self.delta)));
        }
        Ok(k as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < 2 {
            return Err(Error::InvalidParameter("M must be at least 2".into()));
        }
        if self.t_values.is_empty() || self.mar_rates.is_empty() {
            return Err(Error::InvalidParameter("T_values and mar_rates must be nonempty".into()));
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::InvalidParameter(format!("delta must be > 0, got {}", self.delta)));
        }
        let step = self.steps(self.discrete_step, "discrete_step")?;
        for &t in &self.t_values {
            let n = self.steps(t, "T")?;
            if n % step != 0 {
                return Err(Error::InvalidParameter(format!("T = {t} is not a multiple of discrete_step")));
            }
        }
        for &r in &self.mar_rates {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::InvalidParameter(format!("MAR rate must be in [0, 1), got {r}")));
            }
        }
        Ok(())
    }
}

/// One replicate of one `(T, MAR)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sim1Replicate {
    #[serde(rename = "T")]
    pub t: f64,
    pub mar: f64,
    pub replicate: usize,
    pub truth: f64,
    pub se_continuous: Option<f64>,
    pub se_discrete: Option<f64>,
    pub h_continuous: Option<f64>,
    pub h_discrete: Option<f64>,
}

impl Sim1Replicate {
    pub fn failed(&self) -> bool {
        self.se_continuous.is_none() || self.se_discrete.is_none()
    }
}

/// Summary of one `(T, MAR)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sim1Cell {
    #[serde(rename = "T")]
    pub t: f64,
    pub mar: f64,
    pub continuous: Option<SeSummary>,
    pub discrete: Option<SeSummary>,
    pub failrate: f64,
}

#[derive(Debug, Clone)]
pub struct Sim1Output {
    pub cells: Vec<Sim1Cell>,
    pub replicates: Vec<Sim1Replicate>,
    /// `(rate, calibrated offset)`; `None` for complete data.
    pub mar_offsets: Vec<(f64, Option<f64>)>,
}

fn offset_of(m: &MarModel) -> Option<f64> {
    match m {
        MarModel::None => None,
        MarModel::Expit { offset } => Some(*offset),
    }
}

fn build_index(ds: &FunctionalDataset, cfg: &EstimatorConfig, tol: Option<f64>) -> Result<MetricIndex> {
    let idx = MetricIndex::build(ds, cfg.semimetric)?;
    Ok(match tol {
        Some(t) => idx.compressed(t),
        None => idx,
    })
}

struct Task {
    t_index: usize,
    replicate: usize,
}

fn run_task(cfg: &Sim1Config, grid: &Grid, mars: &[MarModel], task: &Task) -> Result<Vec<Sim1Replicate>> {
    let t = cfg.t_values[task.t_index];
    let seed = rng::derive_seed(cfg.seed, tag::REPLICATE, task.replicate as u64);
    let spec = SimSpec {
        model: CurveModel::LegendreLift,
        ou: cfg.ou,
        grid: *grid,
        response: cfg.response,
        noise: cfg.noise,
        mar: MarModel::None,
        horizon: t,
        delta: cfg.delta,
        seed,
    };
    let full = generate(&spec)?;
    let step = cfg.steps(cfg.discrete_step, "discrete_step")?;
    let coarse = full.subsample(step)?;

    let mut qr = rng::stream(seed, tag::QUERY, 0);
    let (_, x) = stationary_curves(CurveModel::LegendreLift, grid, &cfg.ou, 1, &mut qr)?.remove(0);
    let truth = response_value(&x, cfg.response)?;

    let cont_index = build_index(&full, &cfg.continuous, cfg.compress_tol)?;
    let disc_index = build_index(&coarse, &cfg.discrete, None)?;
    let cont_dx = cont_index.distances_to(&x)?;
    let disc_dx = disc_index.distances_to(&x)?;
    let all_y = full.responses();

    let mut out = Vec::with_capacity(mars.len());
    for (rate, mar) in cfg.mar_rates.iter().zip(mars) {
        let keep = mar_indicators(full.curves(), mar, seed);
        let cont_y: Vec<Option<f64>> = all_y.iter().zip(&keep).map(|(y, k)| if *k { *y } else { None }).collect();
        let disc_y: Vec<Option<f64>> = cont_y.iter().skip(step - 1).step_by(step).copied().collect();

        let cont = Estimator::with_responses(&full, &cfg.continuous, cont_index.clone(), cont_y)
            .and_then(|e| estimate_with_fallback(&e, cont_dx.clone()));
        let disc = Estimator::with_responses(&coarse, &cfg.discrete, disc_index.clone(), disc_y)
            .and_then(|e| estimate_with_fallback(&e, disc_dx.clone()));
        let se = |r: &Result<(f64, f64)>| r.as_ref().ok().map(|(m, _)| (m - truth) * (m - truth));
        out.push(Sim1Replicate {
            t,
            mar: *rate,
            replicate: task.replicate,
            truth,
            se_continuous: se(&cont),
            se_discrete: se(&disc),
            h_continuous: cont.as_ref().ok().map(|r| r.1),
            h_discrete: disc.as_ref().ok().map(|r| r.1),
        });
    }
    Ok(out)
}

fn summarize(values: impl Iterator<Item = Option<f64>>) -> Option<SeSummary> {
    let v: Vec<f64> = values.flatten().collect();
    summarize_se(&v).ok()
}

pub fn run_sim1(cfg: &Sim1Config) -> Result<Sim1Output> {
    cfg.validate()?;
    let (a, b) = CurveModel::LegendreLift.interval();
    let grid = Grid::new(a, b, cfg.grid_points)?;
    let mars: Vec<MarModel> = cfg
        .mar_rates
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            calibrate_mar(
                CurveModel::LegendreLift,
                &grid,
                &cfg.ou,
                r,
                cfg.pilot_draws,
                rng::derive_seed(cfg.seed, tag::PILOT, i as u64),
            )
        })
        .collect::<Result<_>>()?;

    let tasks: Vec<Task> = (0..cfg.t_values.len())
        .flat_map(|t_index| (0..cfg.replications).map(move |replicate| Task { t_index, replicate }))
        .collect();
    let results = par_map(&tasks, |task| run_task(cfg, &grid, &mars, task));

    // task order is (T, replicate); regroup to (T, MAR, replicate)
    let mut replicates = Vec::with_capacity(tasks.len() * mars.len());
    for (ti, &t) in cfg.t_values.iter().enumerate() {
        for (mi, &rate) in cfg.mar_rates.iter().enumerate() {
            for (task, res) in tasks.iter().zip(&results) {
                if task.t_index != ti {
                    continue;
                }
                replicates.push(match res {
                    Ok(rows) => rows[mi].clone(),
                    Err(_) => Sim1Replicate {
                        t,
                        mar: rate,
                        replicate: task.replicate,
                        truth: f64::NAN,
                        se_continuous: None,
                        se_discrete: None,
                        h_continuous: None,
                        h_discrete: None,
                    },
                });
            }
        }
    }

    let cells = replicates
        .chunks(cfg.replications)
        .map(|rows| Sim1Cell {
            t: rows[0].t,
            mar: rows[0].mar,
            continuous: summarize(rows.iter().map(|r| r.se_continuous)),
            discrete: summarize(rows.iter().map(|r| r.se_discrete)),
            failrate: rows.iter().filter(|r| r.failed()).count() as f64 / rows.len() as f64,
        })
        .collect();
    let mar_offsets = cfg.mar_rates.iter().zip(&mars).map(|(r, m)| (*r, offset_of(m))).collect();
    Ok(Sim1Output { cells, replicates, mar_offsets })
}

fn opt(v: Option<f64>) -> String {
    v.map(real).unwrap_or_else(|| "NaN".into())
}

/// `T,mar,stat,continuous,discrete,failrate`, four rows per cell.
pub fn table1_csv(out: &Sim1Output) -> String {
    let mut s = String::from("T,mar,stat,continuous,discrete,failrate\n");
    for c in &out.cells {
        let names = ["Q25", "median", "mean", "Q75"];
        for (i, name) in names.iter().enumerate() {
            let pick = |v: &Option<SeSummary>| v.map(|x| x.stats()[i].1);
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                real(c.t),
                real(c.mar),
                name,
                opt(pick(&c.continuous)),
                opt(pick(&c.discrete)),
                real(c.failrate)
            );
        }
    }
    s
}

pub fn replicates_csv(out: &Sim1Output) -> String {
    let mut s = String::from("T,mar,replicate,truth,se_continuous,se_discrete,h_continuous,h_discrete\n");
    for r in &out.replicates {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            real(r.t),
            real(r.mar),
            r.replicate,
            real(r.truth),
            opt(r.se_continuous),
            opt(r.se_discrete),
            opt(r.h_continuous),
            opt(r.h_discrete)
        );
    }
    s
}

/// Writes `table1.csv`, `sim1_replicates.csv` and `meta.json`.
pub fn write_sim1(dir: &Path, cfg: &Sim1Config, out: &Sim1Output) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("table1.csv"), table1_csv(out))?;
    fs::write(dir.join("sim1_replicates.csv"), replicates_csv(out))?;
    write_meta(dir, cfg, cfg.seed, &out.mar_offsets)
}

/// Query curve of a replicate, exposed for checks.
pub fn query_curve(cfg: &Sim1Config, replicate: usize) -> Result<Curve> {
    let (a, b) = CurveModel::LegendreLift.interval();
    let grid = Grid::new(a, b, cfg.grid_points)?;
    let seed = rng::derive_seed(cfg.seed, tag::REPLICATE, replicate as u64);
    Ok(stationary_curves(CurveModel::LegendreLift, &grid, &cfg.ou, 1, &mut rng::stream(seed, tag::QUERY, 0))?
        .remove(0)
        .1)
}
