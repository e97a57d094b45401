//! Semi-metrics between curves and a distance index over a dataset.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcdata::{differentiate_values, Curve, FunctionalDataset, Grid};

/// `d(x1, x2) = ( ∫ (x1^(q) - x2^(q))² )^{1/2}` with `q = 0, 1, 2`.
///
/// For `q ≥ 1` curves differing by a polynomial of degree `< q` are at
/// distance zero, hence "semi".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SemiMetric {
    #[default]
    L2,
    L2Deriv(u8),
}

impl SemiMetric {
    pub fn order(&self) -> usize {
        match self {
            SemiMetric::L2 => 0,
            SemiMetric::L2Deriv(q) => *q as usize,
        }
    }

    /// The curve as seen by this semi-metric (its `q`-th derivative).
    pub fn transform(&self, c: &Curve) -> Result<Vec<f64>> {
        match self.order() {
            0 => Ok(c.values().to_vec()),
            q => differentiate_values(c.grid().spacing(), c.values(), q),
        }
    }

    pub fn eval(&self, x1: &Curve, x2: &Curve) -> Result<f64> {
        if x1.grid() != x2.grid() {
            return Err(Error::GridMismatch);
        }
        let a = self.transform(x1)?;
        let b = self.transform(x2)?;
        Ok(weighted_distance(&x1.grid().trapezoid_weights(), &a, &b))
    }

    fn validate(self) -> Result<Self> {
        match self {
            SemiMetric::L2Deriv(q) if !(1..=2).contains(&q) => Err(Error::InvalidParameter(format!(
                "derivative order of the semi-metric must be 1 or 2, got {q}"
            ))),
            m => Ok(m),
        }
    }
}

/// `semimetric_eval` under its conventional name.
pub fn semimetric_eval(m: SemiMetric, x1: &Curve, x2: &Curve) -> Result<f64> {
    m.eval(x1, x2)
}

/// `sqrt(Σ_i w_i (a_i - b_i)²)`, summed in index order.
#[inline]
fn weighted_distance(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..w.len() {
        let d = a[i] - b[i];
        acc += w[i] * (d * d);
    }
    acc.sqrt()
}

impl fmt::Display for SemiMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SemiMetric::L2 => f.write_str("l2"),
            SemiMetric::L2Deriv(q) => write!(f, "l2deriv{q}"),
        }
    }
}

impl FromStr for SemiMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let m = match s.as_str() {
            "l2" => SemiMetric::L2,
            "l2deriv1" => SemiMetric::L2Deriv(1),
            "l2deriv2" => SemiMetric::L2Deriv(2),
            other => return Err(Error::InvalidParameter(format!("unknown semi-metric `{other}`"))),
        };
        m.validate()
    }
}

impl TryFrom<String> for SemiMetric {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SemiMetric> for String {
    fn from(m: SemiMetric) -> String {
        m.to_string()
    }
}

/// Low-rank coordinates of the transformed sample.
#[derive(Debug, Clone)]
struct Compressed {
    /// Orthonormal basis rows (rank × p) in the `sqrt(w)`-scaled space.
    basis: Vec<f64>,
    rank: usize,
    /// Row-major n × rank coordinates.
    coords: Vec<f64>,
}

/// Precomputed semi-metric transforms of every curve of a dataset.
///
/// Plain indices reproduce [`SemiMetric::eval`] bit for bit. A
/// [`compressed`](MetricIndex::compressed) index projects the sample onto an
/// orthonormal basis of its span, so distances cost `O(rank)` instead of
/// `O(p)`; they agree with the plain values to roughly `tol` relative.
#[derive(Debug, Clone)]
pub struct MetricIndex {
    metric: SemiMetric,
    grid: Grid,
    weights: Vec<f64>,
    p: usize,
    n: usize,
    rows: Vec<f64>,
    compressed: Option<Compressed>,
}

impl MetricIndex {
    pub fn build(ds: &FunctionalDataset, metric: SemiMetric) -> Result<Self> {
        Self::from_curves(ds.grid(), ds.curves(), metric)
    }

    pub fn from_curves<'a>(
        grid: &Grid,
        curves: impl IntoIterator<Item = &'a Curve>,
        metric: SemiMetric,
    ) -> Result<Self> {
        let p = grid.n_points();
        let mut rows = Vec::new();
        let mut n = 0;
        for c in curves {
            if c.grid() != grid {
                return Err(Error::GridMismatch);
            }
            rows.extend(metric.transform(c)?);
            n += 1;
        }
        Ok(Self {
            metric,
            grid: *grid,
            weights: grid.trapezoid_weights(),
            p,
            n,
            rows,
            compressed: None,
        })
    }

    pub fn metric(&self) -> SemiMetric {
        self.metric
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn rank(&self) -> Option<usize> {
        self.compressed.as_ref().map(|c| c.rank)
    }

    /// Gram–Schmidt compression. Rows whose residual after projection is
    /// below `tol` times their norm are not added to the basis. Returns the
    /// index unchanged when the sample is not low rank (rank > p / 4).
    pub fn compressed(mut self, tol: f64) -> Self {
        let p = self.p;
        let max_rank = (p / 4).max(1);
        let sqrt_w: Vec<f64> = self.weights.iter().map(|w| w.sqrt()).collect();
        let mut basis: Vec<f64> = Vec::new();
        let mut rank = 0;
        let mut scaled = vec![0.0; p];
        let mut coef = Vec::new();
        let mut extra = Vec::new();
        // coordinates of each row against the basis as it stood when the row
        // was visited; later basis vectors are orthogonal to it up to `tol`
        let mut partial: Vec<Vec<f64>> = Vec::with_capacity(self.n);
        for k in 0..self.n {
            let row = &self.rows[k * p..(k + 1) * p];
            for i in 0..p {
                scaled[i] = sqrt_w[i] * row[i];
            }
            let norm: f64 = scaled.iter().map(|v| v * v).sum::<f64>().sqrt();
            project_out(&basis, rank, p, &mut scaled, &mut coef);
            let mut resid: f64 = scaled.iter().map(|v| v * v).sum::<f64>().sqrt();
            if resid > tol * norm && resid > 0.0 {
                // second pass restores orthogonality lost to cancellation
                project_out(&basis, rank, p, &mut scaled, &mut extra);
                for (c, e) in coef.iter_mut().zip(&extra) {
                    *c += e;
                }
                resid = scaled.iter().map(|v| v * v).sum::<f64>().sqrt();
            }
            if resid > tol * norm && resid > 0.0 {
                if rank == max_rank {
                    return self;
                }
                basis.extend(scaled.iter().map(|v| v / resid));
                rank += 1;
                coef.push(resid);
            }
            partial.push(coef.clone());
        }
        let mut coords = vec![0.0; self.n * rank];
        for (k, c) in partial.iter().enumerate() {
            coords[k * rank..k * rank + c.len()].copy_from_slice(c);
        }
        self.compressed = Some(Compressed { basis, rank, coords });
        self.rows = Vec::new();
        self
    }

    /// Transform of an arbitrary query curve, ready for [`distances_to_query`].
    pub fn query(&self, x: &Curve) -> Result<Query> {
        if x.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let t = self.metric.transform(x)?;
        Ok(match &self.compressed {
            None => Query { values: t, residual2: 0.0 },
            Some(c) => {
                let mut scaled: Vec<f64> = t
                    .iter()
                    .zip(&self.weights)
                    .map(|(v, w)| v * w.sqrt())
                    .collect();
                let total: f64 = scaled.iter().map(|v| v * v).sum();
                let mut coords = vec![0.0; c.rank];
                for (r, slot) in coords.iter_mut().enumerate() {
                    let b = &c.basis[r * self.p..(r + 1) * self.p];
                    *slot = b.iter().zip(&scaled).map(|(u, v)| u * v).sum();
                }
                let mut tmp = Vec::new();
                project_out(&c.basis, c.rank, self.p, &mut scaled, &mut tmp);
                let resid: f64 = scaled.iter().map(|v| v * v).sum();
                Query { values: coords, residual2: resid.min(total) }
            }
        })
    }

    /// Distances from a query curve to every indexed curve, in index order.
    pub fn distances_to(&self, x: &Curve) -> Result<Vec<f64>> {
        let q = self.query(x)?;
        Ok(self.distances_to_query(&q))
    }

    pub fn distances_to_query(&self, q: &Query) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        match &self.compressed {
            None => {
                for (k, slot) in out.iter_mut().enumerate() {
                    *slot = weighted_distance(&self.weights, &q.values, self.row(k));
                }
            }
            Some(c) => {
                for (k, slot) in out.iter_mut().enumerate() {
                    let row = &c.coords[k * c.rank..(k + 1) * c.rank];
                    let mut acc = q.residual2;
                    for (a, b) in q.values.iter().zip(row) {
                        let d = a - b;
                        acc += d * d;
                    }
                    *slot = acc.sqrt();
                }
            }
        }
        out
    }

    /// Distances from indexed curve `j` to every indexed curve.
    pub fn distances_from(&self, j: usize, out: &mut Vec<f64>) {
        out.clear();
        out.resize(self.n, 0.0);
        match &self.compressed {
            None => {
                let a = self.row(j);
                for (k, slot) in out.iter_mut().enumerate() {
                    *slot = weighted_distance(&self.weights, a, self.row(k));
                }
            }
            Some(c) => {
                let a = &c.coords[j * c.rank..(j + 1) * c.rank];
                for (k, slot) in out.iter_mut().enumerate() {
                    let row = &c.coords[k * c.rank..(k + 1) * c.rank];
                    let mut acc = 0.0;
                    for r in 0..c.rank {
                        let d = a[r] - row[r];
                        acc += d * d;
                    }
                    *slot = acc.sqrt();
                }
            }
        }
    }

    fn row(&self, k: usize) -> &[f64] {
        &self.rows[k * self.p..(k + 1) * self.p]
    }
}

/// A transformed query curve.
#[derive(Debug, Clone)]
pub struct Query {
    values: Vec<f64>,
    residual2: f64,
}

fn project_out(basis: &[f64], rank: usize, p: usize, v: &mut [f64], coef: &mut Vec<f64>) {
    coef.clear();
    for r in 0..rank {
        let b = &basis[r * p..(r + 1) * p];
        let c: f64 = b.iter().zip(v.iter()).map(|(u, w)| u * w).sum();
        for i in 0..p {
            v[i] -= c * b[i];
        }
        coef.push(c);
    }
}
