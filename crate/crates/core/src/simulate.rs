//! Generative models for continuous-time functional data with MAR responses.
//!
//! A latent Ornstein–Uhlenbeck path `Z_t` is lifted to curves, either through
//! a blend of Legendre polynomials (`LegendreLift`) or by scaling a fixed
//! sine profile (`SineShape`). Responses follow `Y = m(X) + ε` and are hidden
//! with probability `1 - p(X)`.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcdata::{differentiate_curve, integrate_curve, Curve, FunctionalDataset, Grid, Observation};
use crate::rng::{self, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuScheme {
    /// Exact Gaussian transition.
    #[default]
    Exact,
    /// Euler–Maruyama, for comparison only.
    Euler,
}

/// `dZ = θ(μ - Z) dt + σ dW`, advanced on a clock of step `dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuParams {
    pub theta: f64,
    pub mu: f64,
    pub sigma: f64,
    pub dt: f64,
    /// Initial state; `None` draws it from the stationary law.
    #[serde(default)]
    pub z0: Option<f64>,
    #[serde(default)]
    pub scheme: OuScheme,
}

impl Default for OuParams {
    fn default() -> Self {
        Self { theta: 2.0, mu: 5.0, sigma: 7.0, dt: 0.005, z0: None, scheme: OuScheme::Exact }
    }
}

impl OuParams {
    pub fn stationary_variance(&self) -> f64 {
        self.sigma * self.sigma / (2.0 * self.theta)
    }

    pub fn stationary_sd(&self) -> f64 {
        self.stationary_variance().sqrt()
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("theta", self.theta), ("sigma", self.sigma), ("dt", self.dt)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::SpecInvalid(format!("OU {name} must be > 0, got {v}")));
            }
        }
        if !self.mu.is_finite() || self.z0.is_some_and(|z| !z.is_finite()) {
            return Err(Error::SpecInvalid("OU mu and z0 must be finite".into()));
        }
        Ok(())
    }

    fn initial(&self, rng: &mut rng::Rng) -> f64 {
        self.z0.unwrap_or_else(|| {
            let e: f64 = StandardNormal.sample(rng);
            self.mu + self.stationary_sd() * e
        })
    }

    /// Advances `z` by a time step `tau`.
    #[inline]
    fn step(&self, z: f64, tau: f64, rng: &mut rng::Rng) -> f64 {
        let e: f64 = StandardNormal.sample(rng);
        match self.scheme {
            OuScheme::Exact => {
                let a = (-self.theta * tau).exp();
                let sd = self.sigma * ((1.0 - a * a) / (2.0 * self.theta)).sqrt();
                self.mu + (z - self.mu) * a + sd * e
            }
            OuScheme::Euler => z + self.theta * (self.mu - z) * tau + self.sigma * tau.sqrt() * e,
        }
    }
}

/// OU path `Z_0, Z_dt, ..., Z_{n dt}` (length `n_steps + 1`).
pub fn simulate_ou(p: &OuParams, n_steps: usize, rng: &mut rng::Rng) -> Vec<f64> {
    let mut z = p.initial(rng);
    let mut path = Vec::with_capacity(n_steps + 1);
    path.push(z);
    for _ in 0..n_steps {
        z = p.step(z, p.dt, rng);
        path.push(z);
    }
    path
}

/// `num(z) = 1 + 2 z sign(z) - sign(z)(1 + sign(z))/2`: 0 ↦ 1, k > 0 ↦ 2k,
/// k < 0 ↦ 1 - 2k.
pub fn num_index(z: i64) -> u64 {
    let s = z.signum();
    (1 + 2 * z * s - s * (1 + s) / 2) as u64
}

/// Legendre polynomial `P_j(s)` by Bonnet's recurrence.
pub fn legendre_poly(j: u64, s: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, s);
    if j == 0 {
        return prev;
    }
    for k in 1..j {
        let k = k as f64;
        let next = ((2.0 * k + 1.0) * s * cur - k * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// `P_j` evaluated on a grid, grown on demand.
#[derive(Debug, Clone)]
pub struct LegendreTable {
    points: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

impl LegendreTable {
    pub fn new(grid: &Grid) -> Self {
        let points = grid.points();
        let rows = vec![vec![1.0; points.len()], points.clone()];
        Self { points, rows }
    }

    pub fn row(&mut self, j: u64) -> &[f64] {
        let j = j as usize;
        while self.rows.len() <= j {
            let k = (self.rows.len() - 1) as f64;
            let (a, b) = (&self.rows[self.rows.len() - 2], &self.rows[self.rows.len() - 1]);
            let next = self
                .points
                .iter()
                .zip(a.iter().zip(b))
                .map(|(s, (pm, pc))| ((2.0 * k + 1.0) * s * pc - k * pm) / (k + 1.0))
                .collect();
            self.rows.push(next);
        }
        &self.rows[j]
    }
}

/// `Γ(z) = (1 + ⌊z⌋ - z) P_{num(⌊z⌋)} + (z - ⌊z⌋) P_{num(⌊z+1⌋)}` on the grid.
pub fn gamma_lift(z: f64, grid: &Grid) -> Result<Curve> {
    gamma_lift_with(z, grid, &mut LegendreTable::new(grid))
}

pub fn gamma_lift_with(z: f64, grid: &Grid, table: &mut LegendreTable) -> Result<Curve> {
    if !z.is_finite() {
        return Err(Error::InvalidParameter(format!("cannot lift non-finite z = {z}")));
    }
    let k = z.floor();
    let (a, b) = (1.0 + k - z, z - k);
    let lo = num_index(k as i64);
    let hi = num_index((z + 1.0).floor() as i64);
    let p_lo = table.row(lo).to_vec();
    let p_hi = table.row(hi);
    let values = p_lo.iter().zip(p_hi).map(|(u, v)| a * u + b * v).collect();
    Curve::new(*grid, values)
}

/// `x(s) = z (1 - sin(s - π/3))` on the grid.
pub fn sine_shape(z: f64, grid: &Grid) -> Result<Curve> {
    Curve::from_fn(*grid, |s| z * (1.0 - (s - std::f64::consts::FRAC_PI_3).sin()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveModel {
    LegendreLift,
    SineShape,
}

impl CurveModel {
    /// Interval the model's curves are defined on.
    pub fn interval(&self) -> (f64, f64) {
        match self {
            CurveModel::LegendreLift => (-1.0, 1.0),
            CurveModel::SineShape => (0.0, std::f64::consts::FRAC_PI_3),
        }
    }

    pub fn default_grid(&self) -> Grid {
        let (a, b) = self.interval();
        let n = match self {
            CurveModel::LegendreLift => 400,
            CurveModel::SineShape => 100,
        };
        Grid::new(a, b, n).expect("static grid")
    }
}

/// Lifts latent values to curves, sharing one Legendre table.
#[derive(Debug, Clone)]
pub struct Lifter {
    model: CurveModel,
    grid: Grid,
    table: Option<LegendreTable>,
}

impl Lifter {
    pub fn new(model: CurveModel, grid: Grid) -> Self {
        let table = (model == CurveModel::LegendreLift).then(|| LegendreTable::new(&grid));
        Self { model, grid, table }
    }

    pub fn lift(&mut self, z: f64) -> Result<Curve> {
        match (&mut self.table, self.model) {
            (Some(t), CurveModel::LegendreLift) => gamma_lift_with(z, &self.grid, t),
            _ => sine_shape(z, &self.grid),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseOperator {
    /// `m(x) = ∫ x²`.
    IntegralSquare,
    /// `m(x) = (∫ x')²`.
    DerivIntegralSquare,
    /// `m(x) = value`, a null model for checks.
    Constant { value: f64 },
}

pub fn response_value(x: &Curve, op: ResponseOperator) -> Result<f64> {
    match op {
        ResponseOperator::IntegralSquare => Ok(curve_energy(x)),
        ResponseOperator::DerivIntegralSquare => {
            let v = integrate_curve(&differentiate_curve(x, 1)?);
            Ok(v * v)
        }
        ResponseOperator::Constant { value } => Ok(value),
    }
}

/// `∫ x²` by trapezoid.
pub fn curve_energy(x: &Curve) -> f64 {
    let sq: Vec<f64> = x.values().iter().map(|v| v * v).collect();
    x.grid().trapezoid(&sq)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    /// `ε_t = U_t - U_{t-lag}` for a Wiener process `U` sampled on the
    /// observation clock, the lag rounded up to whole sampling steps.
    WienerDiff {
        #[serde(default = "one")]
        lag: f64,
    },
    /// i.i.d. `N(0, sd²)`.
    GaussianIid { sd: f64 },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarModel {
    /// Every response observed.
    #[default]
    None,
    /// `P(ζ = 1 | X = x) = expit(∫ x² - offset)`.
    Expit {
        #[serde(default)]
        offset: f64,
    },
}

impl MarModel {
    pub fn probability(&self, x: &Curve) -> f64 {
        match self {
            MarModel::None => 1.0,
            MarModel::Expit { offset } => expit(curve_energy(x) - offset),
        }
    }
}

pub fn expit(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// `p(x) = expit(∫ x²)`.
pub fn mar_probability(x: &Curve) -> f64 {
    MarModel::Expit { offset: 0.0 }.probability(x)
}

/// Complete description of one simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub model: CurveModel,
    #[serde(default)]
    pub ou: OuParams,
    pub grid: Grid,
    pub response: ResponseOperator,
    pub noise: NoiseModel,
    #[serde(default)]
    pub mar: MarModel,
    /// Observation horizon `T`.
    #[serde(rename = "T")]
    pub horizon: f64,
    pub delta: f64,
    pub seed: u64,
}

impl SimSpec {
    /// Legendre-lift model observed on `[0, T]` with mesh `delta`.
    pub fn legendre(horizon: f64, delta: f64, seed: u64) -> Self {
        Self {
            model: CurveModel::LegendreLift,
            ou: OuParams::default(),
            grid: CurveModel::LegendreLift.default_grid(),
            response: ResponseOperator::IntegralSquare,
            noise: NoiseModel::WienerDiff { lag: 1.0 },
            mar: MarModel::None,
            horizon,
            delta,
            seed,
        }
    }

    /// Sine-shape model with `n` observations at mesh `delta`.
    pub fn sine(n: usize, delta: f64, seed: u64) -> Self {
        Self {
            model: CurveModel::SineShape,
            ou: OuParams::default(),
            grid: CurveModel::SineShape.default_grid(),
            response: ResponseOperator::DerivIntegralSquare,
            noise: NoiseModel::GaussianIid { sd: 0.075 },
            mar: MarModel::None,
            horizon: n as f64 * delta,
            delta,
            seed,
        }
    }

    pub fn with_mar(mut self, mar: MarModel) -> Self {
        self.mar = mar;
        self
    }

    pub fn with_grid_points(mut self, n_points: usize) -> Result<Self> {
        let (a, b) = self.model.interval();
        self.grid = Grid::new(a, b, n_points)?;
        Ok(self)
    }

    /// Number of observations `n = T / δ`.
    pub fn n_observations(&self) -> Result<usize> {
        if !(self.delta.is_finite() && self.delta > 0.0 && self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::SpecInvalid("T and delta must be positive".into()));
        }
        let ratio = self.horizon / self.delta;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-6 * n.max(1.0) {
            return Err(Error::SpecInvalid(format!(
                "T = {} is not a whole number of steps delta = {}",
                self.horizon, self.delta
            )));
        }
        Ok(n as usize)
    }

    pub fn validate(&self) -> Result<usize> {
        self.ou.validate()?;
        let (a, b) = self.model.interval();
        if (self.grid.start() - a).abs() > 1e-12 || (self.grid.end() - b).abs() > 1e-12 {
            return Err(Error::SpecInvalid(format!(
                "grid [{}, {}] does not match the model interval [{a}, {b}]",
                self.grid.start(),
                self.grid.end()
            )));
        }
        if self.grid.n_points() < 4 {
            return Err(Error::SpecInvalid("curve grid needs at least 4 points".into()));
        }
        match self.noise {
            NoiseModel::WienerDiff { lag } if !(lag.is_finite() && lag > 0.0) => {
                return Err(Error::SpecInvalid(format!("noise lag must be > 0, got {lag}")))
            }
            NoiseModel::GaussianIid { sd } if !(sd.is_finite() && sd >= 0.0) => {
                return Err(Error::SpecInvalid(format!("noise sd must be >= 0, got {sd}")))
            }
            _ => {}
        }
        if let MarModel::Expit { offset } = self.mar {
            if !offset.is_finite() {
                return Err(Error::SpecInvalid("MAR offset must be finite".into()));
            }
        }
        self.n_observations()
    }
}

/// A generated dataset with its latent path.
#[derive(Debug, Clone)]
pub struct Simulated {
    pub dataset: FunctionalDataset,
    /// `Z_{t_k}` at every observation instant.
    pub latent: Vec<f64>,
}

/// Latent OU values at `t_k = kδ`, `k = 1..n`.
fn latent_at_observations(ou: &OuParams, n: usize, delta: f64, rng: &mut rng::Rng) -> Vec<f64> {
    let ratio = delta / ou.dt;
    let sub = if (ratio - ratio.round()).abs() < 1e-9 { ratio.round() } else { ratio.ceil() }.max(1.0) as usize;
    let tau = delta / sub as f64;
    let mut z = ou.initial(rng);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        for _ in 0..sub {
            z = ou.step(z, tau, rng);
        }
        out.push(z);
    }
    out
}

fn noise_values(noise: NoiseModel, n: usize, delta: f64, rng: &mut rng::Rng) -> Vec<f64> {
    match noise {
        NoiseModel::GaussianIid { sd } => (0..n)
            .map(|_| {
                let e: f64 = StandardNormal.sample(rng);
                sd * e
            })
            .collect(),
        NoiseModel::WienerDiff { lag } => {
            let lag_steps = ((lag / delta) - 1e-9).ceil().max(1.0) as usize;
            let sd = delta.sqrt();
            // increments of U on (t_{k-1}, t_k], starting lag_steps before t_1
            let incr: Vec<f64> = (0..n + lag_steps)
                .map(|_| {
                    let e: f64 = StandardNormal.sample(rng);
                    sd * e
                })
                .collect();
            let mut u = Vec::with_capacity(incr.len() + 1);
            let mut acc = 0.0;
            u.push(acc);
            for d in &incr {
                acc += d;
                u.push(acc);
            }
            (0..n).map(|k| u[k + lag_steps] - u[k]).collect()
        }
    }
}

/// Draws one dataset. A pure function of the spec, seed included.
pub fn generate(spec: &SimSpec) -> Result<FunctionalDataset> {
    Ok(generate_with_latent(spec)?.dataset)
}

pub fn generate_with_latent(spec: &SimSpec) -> Result<Simulated> {
    let n = spec.validate()?;
    let latent = latent_at_observations(&spec.ou, n, spec.delta, &mut rng::stream(spec.seed, tag::OU, 0));
    let noise = noise_values(spec.noise, n, spec.delta, &mut rng::stream(spec.seed, tag::NOISE, 0));
    let mut lifter = Lifter::new(spec.model, spec.grid);
    let mut observations = Vec::with_capacity(n);
    for (k, (&z, &eps)) in latent.iter().zip(&noise).enumerate() {
        let x = lifter.lift(z)?;
        let y = Some(response_value(&x, spec.response)? + eps);
        observations.push(Observation { t: (k + 1) as f64 * spec.delta, x, y });
    }
    let observed = mar_indicators(observations.iter().map(|o| &o.x), &spec.mar, spec.seed);
    for (o, keep) in observations.iter_mut().zip(observed) {
        if !keep {
            o.y = None;
        }
    }
    let dataset = FunctionalDataset::new(spec.grid, spec.delta, observations)?;
    Ok(Simulated { dataset, latent })
}

/// Draws `ζ_k ~ Bernoulli(p(x_k))` from the MAR stream of `seed`. The k-th
/// coin is the same uniform whatever the law, so stricter laws hide a
/// superset of the responses.
pub fn mar_indicators<'a>(curves: impl IntoIterator<Item = &'a Curve>, mar: &MarModel, seed: u64) -> Vec<bool> {
    let mut r = rng::stream(seed, tag::MAR, 0);
    curves
        .into_iter()
        .map(|x| {
            let u: f64 = r.random();
            match mar {
                MarModel::None => true,
                m => u < m.probability(x),
            }
        })
        .collect()
}

/// Curves lifted from independent draws of the stationary OU law.
pub fn stationary_curves(
    model: CurveModel,
    grid: &Grid,
    ou: &OuParams,
    count: usize,
    rng: &mut rng::Rng,
) -> Result<Vec<(f64, Curve)>> {
    let mut lifter = Lifter::new(model, *grid);
    (0..count)
        .map(|_| {
            let e: f64 = StandardNormal.sample(rng);
            let z = ou.mu + ou.stationary_sd() * e;
            Ok((z, lifter.lift(z)?))
        })
        .collect()
}

/// Expected missing rate `E[1 - expit(∫X² - c)]` over a pilot sample.
pub fn missing_rate(energies: &[f64], offset: f64) -> f64 {
    energies.iter().map(|e| 1.0 - expit(e - offset)).sum::<f64>() / energies.len() as f64
}

/// Offset `c` such that `expit(∫x² - c)` hides a fraction `target` of the
/// responses under the stationary law, solved by bisection on a pilot sample.
pub fn calibrate_mar(
    model: CurveModel,
    grid: &Grid,
    ou: &OuParams,
    target: f64,
    pilot_draws: usize,
    seed: u64,
) -> Result<MarModel> {
    if !(0.0..1.0).contains(&target) {
        return Err(Error::InvalidParameter(format!("missing rate must be in [0,1), got {target}")));
    }
    if target == 0.0 {
        return Ok(MarModel::None);
    }
    let mut r = rng::stream(seed, tag::PILOT, 0);
    let energies: Vec<f64> = stationary_curves(model, grid, ou, pilot_draws.max(1), &mut r)?
        .iter()
        .map(|(_, c)| curve_energy(c))
        .collect();
    let (mut lo, mut hi) = (-1.0, 1.0);
    while missing_rate(&energies, lo) > target {
        lo = 2.0 * lo - 1.0;
    }
    while missing_rate(&energies, hi) < target {
        hi = 2.0 * hi + 1.0;
        if hi > 1e12 {
            return Err(Error::InvalidParameter("missing rate is unreachable".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if missing_rate(&energies, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(MarModel::Expit { offset: 0.5 * (lo + hi) })
}
