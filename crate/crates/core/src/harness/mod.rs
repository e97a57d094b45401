//! Monte Carlo studies: continuous versus discrete sampling (`sim1`) and
//! the choice of sampling mesh (`sim2`).
//!
//! Work is split into independent tasks, each seeded from the root seed and
//! its replicate index, and results are reduced in task order, so outputs do
//! not depend on the number of threads.

pub mod sim1;
pub mod sim2;
pub mod summary;
pub mod svg;

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::bandwidth::KNN_NUDGE;
use crate::error::{Error, Result};
use crate::estimator::{Estimator, LocalFit, PsiFamily};

pub use sim1::{run_sim1, Sim1Config, Sim1Output};
pub use sim2::{run_sim2, Sim2Config, Sim2Output};
pub use summary::{summarize_se, SeSummary};

pub const QUANTILE_CONVENTION: &str = "type-7 (linear interpolation of order statistics)";

#[cfg(feature = "parallel")]
pub(crate) fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_map<T, R>(items: &[T], f: impl Fn(&T) -> R) -> Vec<R> {
    items.iter().map(f).collect()
}

/// Regression estimate at a query with known distances. An empty
/// neighbourhood is retried once with `h` widened to the nearest curve
/// carrying a response.
pub fn estimate_with_fallback(est: &Estimator<'_>, dx: Vec<f64>) -> Result<(f64, f64)> {
    match est.at_distances(dx.clone()).and_then(|f| Ok((f.regress(PsiFamily::Identity)?, f.h()))) {
        Err(Error::EmptyNeighborhood { .. }) => {
            let nearest = dx
                .iter()
                .zip(est.responses())
                .filter(|(_, y)| y.is_some())
                .map(|(d, _)| *d)
                .fold(f64::INFINITY, f64::min);
            if !nearest.is_finite() {
                return Err(Error::EmptyNeighborhood { h: nearest });
            }
            let h = (nearest * (1.0 + KNN_NUDGE)).max(f64::MIN_POSITIVE);
            let fit = LocalFit::new(est.responses(), dx, h, est.config().kernel)?;
            Ok((fit.regress(PsiFamily::Identity)?, h))
        }
        other => other,
    }
}

/// Shortest representation that parses back to the same `f64`.
pub(crate) fn real(v: f64) -> String {
    format!("{v}")
}

#[derive(Serialize)]
struct Meta<'a, C: Serialize> {
    version: &'static str,
    seed: u64,
    quantile_convention: &'static str,
    config: &'a C,
    #[serde(skip_serializing_if = "Option::is_none")]
    mar_offsets: Option<&'a [(f64, Option<f64>)]>,
}

pub(crate) fn write_meta<C: Serialize>(
    dir: &Path,
    config: &C,
    seed: u64,
    mar_offsets: &[(f64, Option<f64>)],
) -> Result<()> {
    let meta = Meta {
        version: env!("CARGO_PKG_VERSION"),
        seed,
        quantile_convention: QUANTILE_CONVENTION,
        config,
        mar_offsets: Some(mar_offsets),
    };
    fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}
