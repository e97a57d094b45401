//! Kernel estimation of the generalized regression operator `E[ψ(Y) | X = x]`
//! for sampled continuous-time functional data with responses missing at
//! random, with asymptotic and bootstrap confidence intervals and the
//! simulation harness used to study the estimator.

pub mod bandwidth;
pub mod config;
pub mod error;
pub mod estimator;
pub mod funcdata;
pub mod inference;
pub mod kernel;
pub mod metric;
pub mod rng;
pub mod harness;
pub mod simulate;

pub use bandwidth::{BandwidthChoice, BandwidthRule, CvOptions};
pub use config::EstimatorConfig;
pub use error::{Error, Result};
pub use estimator::{Estimator, LocalFit, PsiFamily};
pub use funcdata::{Curve, FunctionalDataset, Grid, Observation};
pub use inference::{CIRequest, CIResult, CiMethod, WeightLaw};
pub use kernel::Kernel;
pub use metric::{MetricIndex, SemiMetric};
pub use simulate::SimSpec;
