//! Sampled curves and incomplete functional time series.
//!
//! Every curve lives on a uniform [`Grid`]. A [`FunctionalDataset`] is the
//! regularly sampled path `(t_k, X_{t_k}, Y_{t_k}, ζ_{t_k})`, `t_k = kδ`, of a
//! continuous-time process whose real response may be missing.

mod io;

pub use io::{read_curve_csv, read_dataset_csv, write_curve_csv, write_dataset_csv};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform abscissa grid `start = s_0 < s_1 < ... < s_{p-1} = end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec")]
pub struct Grid {
    start: f64,
    end: f64,
    n_points: usize,
}

impl Grid {
    pub fn new(start: f64, end: f64, n_points: usize) -> Result<Self> {
        if !(start.is_finite() && end.is_finite()) {
            return Err(Error::InvalidGrid("bounds must be finite".into()));
        }
        if start >= end {
            return Err(Error::InvalidGrid(format!("start {start} must be < end {end}")));
        }
        if n_points < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {n_points}")));
        }
        let grid = Self { start, end, n_points };
        if grid.spacing() <= 0.0 {
            return Err(Error::InvalidGrid("spacing underflows to zero".into()));
        }
        Ok(grid)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn spacing(&self) -> f64 {
        (self.end - self.start) / (self.n_points - 1) as f64
    }

    /// The `i`-th abscissa. The last point is pinned to `end` exactly.
    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            self.end
        } else {
            self.start + i as f64 * self.spacing()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.point(i)).collect()
    }

    /// Trapezoid quadrature weights: `h/2` at both ends, `h` inside.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let h = self.spacing();
        let mut w = vec![h; self.n_points];
        w[0] = 0.5 * h;
        w[self.n_points - 1] = 0.5 * h;
        w
    }

    /// Trapezoid rule for values sampled on this grid.
    pub fn trapezoid(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.n_points);
        let h = self.spacing();
        let last = values.len() - 1;
        let mut acc = 0.0;
        for (i, v) in values.iter().enumerate() {
            let w = if i == 0 || i == last { 0.5 * h } else { h };
            acc += w * v;
        }
        acc
    }
}

#[derive(Deserialize)]
struct GridSpec {
    start: f64,
    end: f64,
    n_points: usize,
}

impl TryFrom<GridSpec> for Grid {
    type Error = Error;

    fn try_from(g: GridSpec) -> Result<Self> {
        Grid::new(g.start, g.end, g.n_points)
    }
}

/// A real function sampled on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    grid: Grid,
    values: Vec<f64>,
}

impl Curve {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::InvalidCurve(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.n_points()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidCurve(format!("non-finite value at index {i}")));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.points().into_iter().map(f).collect())
    }

    pub fn constant(grid: Grid, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.n_points()])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Pointwise map, keeping the grid.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &Curve, b: f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(u, v)| a * u + b * v)
            .collect();
        Self::new(self.grid, values)
    }
}

/// Trapezoid approximation of `∫ c(s) ds` over the curve's grid.
pub fn integrate_curve(c: &Curve) -> f64 {
    c.grid.trapezoid(&c.values)
}

/// Finite-difference derivative of order 1 or 2 on the curve's own grid.
///
/// Interior points use central stencils; both ends use second-order
/// one-sided stencils, so the result is exact on quadratics (order 1) and
/// cubics (order 2).
pub fn differentiate_curve(c: &Curve, order: usize) -> Result<Curve> {
    let values = differentiate_values(c.grid.spacing(), &c.values, order)?;
    Ok(Curve { grid: c.grid, values })
}

pub(crate) fn differentiate_values(h: f64, f: &[f64], order: usize) -> Result<Vec<f64>> {
    let p = f.len();
    match order {
        1 | 2 if p < order + 2 => Err(Error::GridTooCoarse { n_points: p, order }),
        1 => {
            let inv = 1.0 / (2.0 * h);
            let mut d = vec![0.0; p];
            d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) * inv;
            for i in 1..p - 1 {
                d[i] = (f[i + 1] - f[i - 1]) * inv;
            }
            d[p - 1] = (3.0 * f[p - 1] - 4.0 * f[p - 2] + f[p - 3]) * inv;
            Ok(d)
        }
        2 => {
            let inv = 1.0 / (h * h);
            let mut d = vec![0.0; p];
            d[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) * inv;
            for i in 1..p - 1 {
                d[i] = (f[i - 1] - 2.0 * f[i] + f[i + 1]) * inv;
            }
            d[p - 1] = (2.0 * f[p - 1] - 5.0 * f[p - 2] + 4.0 * f[p - 3] - f[p - 4]) * inv;
            Ok(d)
        }
        _ => Err(Error::InvalidParameter(format!(
            "derivative order must be 1 or 2, got {order}"
        ))),
    }
}

/// One sampling instant: covariate curve, response when observed.
///
/// `ζ = 1` exactly when `y` is present, so the two can never disagree.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub t: f64,
    pub x: Curve,
    pub y: Option<f64>,
}

impl Observation {
    pub fn zeta(&self) -> u8 {
        u8::from(self.y.is_some())
    }

    pub fn is_observed(&self) -> bool {
        self.y.is_some()
    }
}

/// Regularly sampled incomplete functional time series.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalDataset {
    grid: Grid,
    delta: f64,
    observations: Vec<Observation>,
}

impl FunctionalDataset {
    pub fn new(grid: Grid, delta: f64, observations: Vec<Observation>) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidDataset(format!("mesh must be > 0, got {delta}")));
        }
        if observations.is_empty() {
            return Err(Error::InvalidDataset("no observations".into()));
        }
        let mut prev = f64::NEG_INFINITY;
        for (k, obs) in observations.iter().enumerate() {
            if obs.x.grid() != &grid {
                return Err(Error::GridMismatch);
            }
            if !(obs.t >= 0.0 && obs.t > prev) {
                return Err(Error::InvalidDataset(format!(
                    "times must be nonnegative and strictly increasing (row {k})"
                )));
            }
            let expected = (k + 1) as f64 * delta;
            if (obs.t - expected).abs() > 1e-9 * expected.max(1.0) {
                return Err(Error::InvalidDataset(format!(
                    "row {k}: t = {} but a regular mesh gives {expected}",
                    obs.t
                )));
            }
            if let Some(y) = obs.y {
                if !y.is_finite() {
                    return Err(Error::InvalidDataset(format!("row {k}: non-finite response")));
                }
            }
            prev = obs.t;
        }
        Ok(Self { grid, delta, observations })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Observation horizon `T = nδ`.
    pub fn horizon(&self) -> f64 {
        self.len() as f64 * self.delta
    }

    pub fn n_observed(&self) -> usize {
        self.observations.iter().filter(|o| o.is_observed()).count()
    }

    pub fn responses(&self) -> Vec<Option<f64>> {
        self.observations.iter().map(|o| o.y).collect()
    }

    pub fn curves(&self) -> impl Iterator<Item = &Curve> {
        self.observations.iter().map(|o| &o.x)
    }

    /// Keeps every `step`-th observation (`step`, `2 step`, ...), i.e. the same
    /// path seen on the coarser mesh `step * δ`.
    pub fn subsample(&self, step: usize) -> Result<Self> {
        if step == 0 {
            return Err(Error::InvalidParameter("subsample step must be >= 1".into()));
        }
        let delta = self.delta * step as f64;
        let observations: Vec<_> = self
            .observations
            .iter()
            .skip(step - 1)
            .step_by(step)
            .enumerate()
            .map(|(k, o)| Observation { t: (k + 1) as f64 * delta, ..o.clone() })
            .collect();
        Self::new(self.grid, delta, observations)
    }
}
