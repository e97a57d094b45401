//! Choice of the sampling mesh on the sine-shape model.
//!
//! For every mesh `δ` of the grid, `n` observations are taken at
//! `δ, 2δ, ..., nδ` and the regression operator is estimated at a frozen set
//! of evaluation curves. `MISE(δ)` averages the squared errors over the
//! evaluation curves and the replicates; `δ*` minimises it.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::summary::{mean, quantile_sorted};
use super::svg::{line_chart, Series};
use super::{estimate_with_fallback, par_map, real, write_meta};
use crate::config::EstimatorConfig;
use crate::error::{Error, Result};
use crate::estimator::Estimator;
use crate::funcdata::{Curve, Grid};
use crate::metric::{MetricIndex, SemiMetric};
use crate::rng::{self, tag};
use crate::simulate::{
    calibrate_mar, generate, mar_indicators, response_value, stationary_curves, CurveModel, MarModel,
    NoiseModel, OuParams, ResponseOperator, SimSpec,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sim2Config {
    pub n_fixed: usize,
    pub delta_grid: Vec<f64>,
    pub eval_curves: usize,
    #[serde(rename = "N")]
    pub replications: usize,
    pub mar_rates: Vec<f64>,
    pub seed: u64,
    pub grid_points: usize,
    pub ou: OuParams,
    pub noise: NoiseModel,
    pub pilot_draws: usize,
    pub estimator: EstimatorConfig,
}

/// `0.10, 0.15, ..., 0.60`.
pub fn default_delta_grid() -> Vec<f64> {
    (0..=10).map(|i| (10 + 5 * i) as f64 / 100.0).collect()
}

impl Default for Sim2Config {
    fn default() -> Self {
        Self {
            n_fixed: 200,
            delta_grid: default_delta_grid(),
            eval_curves: 50,
            replications: 100,
            mar_rates: vec![0.0, 0.1, 0.5],
            seed: 20_240_602,
            grid_points: 100,
            ou: OuParams::default(),
            noise: NoiseModel::GaussianIid { sd: 0.075 },
            pilot_draws: 100_000,
            estimator: EstimatorConfig::default().with_semimetric(SemiMetric::L2Deriv(1)),
        }
    }
}

impl Sim2Config {
    pub fn validate(&self) -> Result<()> {
        if self.delta_grid.is_empty() || self.delta_grid.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::InvalidParameter("delta_grid must be nonempty and strictly positive".into()));
        }
        if self.replications < 1 || self.eval_curves < 1 || self.n_fixed < 2 {
            return Err(Error::InvalidParameter("N, eval_curves and n_fixed must be positive (n_fixed >= 2)".into()));
        }
        if self.mar_rates.is_empty() || self.mar_rates.iter().any(|r| !(0.0..1.0).contains(r)) {
            return Err(Error::InvalidParameter("MAR rates must be in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        let (a, b) = CurveModel::SineShape.interval();
        Grid::new(a, b, self.grid_points)
    }
}

/// Integrated squared error of one replicate, or `None` if it failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sim2Replicate {
    pub mar: f64,
    pub delta: f64,
    pub replicate: usize,
    pub ise: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MisePoint {
    pub mar: f64,
    pub delta: f64,
    pub mise: f64,
    pub se_of_mise: f64,
    pub failures: usize,
}

/// Per-rate summary of the MISE curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeshChoice {
    pub mar: f64,
    pub delta_star: f64,
    pub mise_star: f64,
    pub mise_mean: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

#[derive(Debug, Clone)]
pub struct Sim2Output {
    pub curve: Vec<MisePoint>,
    pub choices: Vec<MeshChoice>,
    pub replicates: Vec<Sim2Replicate>,
    pub mar_offsets: Vec<(f64, Option<f64>)>,
}

/// The frozen evaluation curves and their true responses.
pub fn evaluation_set(cfg: &Sim2Config) -> Result<Vec<(Curve, f64)>> {
    let grid = cfg.grid()?;
    let mut r = rng::stream(cfg.seed, tag::EVAL_CURVES, 0);
    stationary_curves(CurveModel::SineShape, &grid, &cfg.ou, cfg.eval_curves, &mut r)?
        .into_iter()
        .map(|(_, c)| {
            let m = response_value(&c, ResponseOperator::DerivIntegralSquare)?;
            Ok((c, m))
        })
        .collect()
}

struct Task {
    delta_index: usize,
    replicate: usize,
}

fn run_task(cfg: &Sim2Config, grid: &Grid, mars: &[MarModel], eval: &[(Curve, f64)], task: &Task) -> Result<Vec<Option<f64>>> {
    let delta = cfg.delta_grid[task.delta_index];
    let seed = rng::derive_seed(cfg.seed, tag::REPLICATE, task.replicate as u64);
    let spec = SimSpec {
        model: CurveModel::SineShape,
        ou: cfg.ou,
        grid: *grid,
        response: ResponseOperator::DerivIntegralSquare,
        noise: cfg.noise,
        mar: MarModel::None,
        horizon: cfg.n_fixed as f64 * delta,
        delta,
        seed,
    };
    let ds = generate(&spec)?;
    let index = MetricIndex::build(&ds, cfg.estimator.semimetric)?;
    let dxs: Vec<Vec<f64>> = eval.iter().map(|(c, _)| index.distances_to(c)).collect::<Result<_>>()?;
    let all_y = ds.responses();
    Ok(mars
        .iter()
        .map(|mar| {
            let keep = mar_indicators(ds.curves(), mar, seed);
            let y: Vec<Option<f64>> = all_y.iter().zip(&keep).map(|(y, k)| if *k { *y } else { None }).collect();
            let est = Estimator::with_responses(&ds, &cfg.estimator, index.clone(), y).ok()?;
            let mut acc = 0.0;
            for ((_, truth), dx) in eval.iter().zip(&dxs) {
                let (m, _) = estimate_with_fallback(&est, dx.clone()).ok()?;
                acc += (m - truth) * (m - truth);
            }
            Some(acc / eval.len() as f64)
        })
        .collect())
}

/// Standard error of a mean: sample standard deviation over `sqrt(n)`.
fn standard_error(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
}

pub fn run_sim2(cfg: &Sim2Config) -> Result<Sim2Output> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let mars: Vec<MarModel> = cfg
        .mar_rates
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            calibrate_mar(
                CurveModel::SineShape,
                &grid,
                &cfg.ou,
                r,
                cfg.pilot_draws,
                rng::derive_seed(cfg.seed, tag::PILOT, i as u64),
            )
        })
        .collect::<Result<_>>()?;
    let eval = evaluation_set(cfg)?;

    let tasks: Vec<Task> = (0..cfg.delta_grid.len())
        .flat_map(|delta_index| (0..cfg.replications).map(move |replicate| Task { delta_index, replicate }))
        .collect();
    let results = par_map(&tasks, |t| run_task(cfg, &grid, &mars, &eval, t));

    let mut replicates = Vec::new();
    let mut curve = Vec::new();
    for (mi, &rate) in cfg.mar_rates.iter().enumerate() {
        for (di, &delta) in cfg.delta_grid.iter().enumerate() {
            let mut ok = Vec::with_capacity(cfg.replications);
            for (task, res) in tasks.iter().zip(&results) {
                if task.delta_index != di {
                    continue;
                }
                let ise = res.as_ref().ok().and_then(|v| v[mi]);
                ok.extend(ise);
                replicates.push(Sim2Replicate { mar: rate, delta, replicate: task.replicate, ise });
            }
            let mise = if ok.is_empty() { f64::NAN } else { mean(&ok) };
            curve.push(MisePoint {
                mar: rate,
                delta,
                mise,
                se_of_mise: standard_error(&ok),
                failures: cfg.replications - ok.len(),
            });
        }
    }

    let choices = cfg
        .mar_rates
        .iter()
        .map(|&rate| {
            let pts: Vec<&MisePoint> = curve.iter().filter(|p| p.mar == rate && p.mise.is_finite()).collect();
            if pts.is_empty() {
                return Err(Error::InsufficientData(format!("every replicate failed at MAR rate {rate}")));
            }
            let best = pts
                .iter()
                .min_by(|a, b| a.mise.total_cmp(&b.mise).then(a.delta.total_cmp(&b.delta)))
                .expect("nonempty");
            let values: Vec<f64> = pts.iter().map(|p| p.mise).collect();
            let mut sorted = values.clone();
            sorted.sort_by(f64::total_cmp);
            Ok(MeshChoice {
                mar: rate,
                delta_star: best.delta,
                mise_star: best.mise,
                mise_mean: mean(&values),
                q25: quantile_sorted(&sorted, 0.25),
                median: quantile_sorted(&sorted, 0.5),
                q75: quantile_sorted(&sorted, 0.75),
            })
        })
        .collect::<Result<_>>()?;
    let mar_offsets = cfg
        .mar_rates
        .iter()
        .zip(&mars)
        .map(|(r, m)| (*r, if let MarModel::Expit { offset } = m { Some(*offset) } else { None }))
        .collect();
    Ok(Sim2Output { curve, choices, replicates, mar_offsets })
}

pub fn mise_csv(out: &Sim2Output) -> String {
    let mut s = String::from("mar,delta,mise,se_of_mise\n");
    for p in &out.curve {
        let _ = writeln!(s, "{},{},{},{}", real(p.mar), real(p.delta), real(p.mise), real(p.se_of_mise));
    }
    s
}

pub fn table2_csv(out: &Sim2Output) -> String {
    let mut s = String::from("mar,delta_star,mise_star,mise_mean,q25,median,q75\n");
    for c in &out.choices {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            real(c.mar),
            real(c.delta_star),
            real(c.mise_star),
            real(c.mise_mean),
            real(c.q25),
            real(c.median),
            real(c.q75)
        );
    }
    s
}

pub fn replicates_csv(out: &Sim2Output) -> String {
    let mut s = String::from("mar,delta,replicate,ise\n");
    for r in &out.replicates {
        let ise = r.ise.map(real).unwrap_or_else(|| "NaN".into());
        let _ = writeln!(s, "{},{},{},{}", real(r.mar), real(r.delta), r.replicate, ise);
    }
    s
}

pub fn mise_svg(cfg: &Sim2Config, out: &Sim2Output) -> String {
    let series: Vec<Series> = cfg
        .mar_rates
        .iter()
        .map(|&rate| Series {
            label: if rate == 0.0 { "complete".into() } else { format!("MAR {}%", real(100.0 * rate)) },
            points: out.curve.iter().filter(|p| p.mar == rate).map(|p| (p.delta, p.mise)).collect(),
        })
        .collect();
    line_chart("MISE by sampling mesh", "sampling mesh delta", "MISE", &series)
}

/// Writes `mise.csv`, `table2.csv`, `sim2_replicates.csv`, `mise.svg` and
/// `meta.json`.
pub fn write_sim2(dir: &Path, cfg: &Sim2Config, out: &Sim2Output) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("mise.csv"), mise_csv(out))?;
    fs::write(dir.join("table2.csv"), table2_csv(out))?;
    fs::write(dir.join("sim2_replicates.csv"), replicates_csv(out))?;
    fs::write(dir.join("mise.svg"), mise_svg(cfg, out))?;
    write_meta(dir, cfg, cfg.seed, &out.mar_offsets)
}
