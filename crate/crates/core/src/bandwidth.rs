//! Data-driven bandwidth: local cross-validation over κ-nearest neighbours.
//!
//! For a query `x` and each candidate `κ`, `h_κ(x)` is the distance from `x`
//! to its κ-th nearest curve with an observed response. The candidate is
//! scored by the mean leave-out squared error of the observed curves
//! inside `h_κ(x)`, each left-out prediction using its own `h_κ(X_j)`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcdata::{Curve, FunctionalDataset};
use crate::kernel::Kernel;
use crate::metric::{MetricIndex, SemiMetric};

/// Relative widening of `h_κ` so the κ-th neighbour sits strictly inside the
/// kernel support.
pub const KNN_NUDGE: f64 = 1e-12;

pub const DEFAULT_KAPPAS: [usize; 6] = [5, 10, 15, 20, 30, 50];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandwidthRule {
    Fixed(f64),
    Knn(Vec<usize>),
}

impl Default for BandwidthRule {
    fn default() -> Self {
        BandwidthRule::Knn(DEFAULT_KAPPAS.to_vec())
    }
}

/// How the leave-out squared errors of the neighbours of `x` are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CvScore {
    /// Average over the neighbours inside `h_κ(x)`.
    #[default]
    Mean,
    /// Plain sum over the same neighbours. The number of terms grows with
    /// κ, so this leans heavily towards the smallest candidate.
    Sum,
}

/// Knobs of the cross-validation criterion.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvOptions {
    /// Also leave out the observations within this many sampling steps of
    /// the one being predicted (0 is plain leave-one-out). Needed when the
    /// noise is correlated along the sampling clock.
    pub exclusion: usize,
    /// Score each κ on at most this many neighbours, spread evenly by
    /// distance rank; a sum is then rescaled to the full neighbourhood.
    /// `None` uses all of them.
    pub max_points: Option<usize>,
    pub score: CvScore,
}

/// Outcome of bandwidth resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthChoice {
    pub h: f64,
    pub kappa: Option<usize>,
    /// `(κ, CV score)` for every candidate that was scored.
    pub scores: Vec<(usize, f64)>,
}

/// `(distance, observation index)` ordered by distance then index.
type Ranked = (f64, usize);

fn rank_cmp(a: &Ranked, b: &Ranked) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

fn nudged(d: f64) -> f64 {
    let h = d * (1.0 + KNN_NUDGE);
    if h > 0.0 {
        h
    } else {
        f64::MIN_POSITIVE
    }
}

/// Sorted `m` nearest entries plus any further entries tied within the nudge
/// of the m-th distance.
fn nearest_sorted(mut entries: Vec<Ranked>, m: usize) -> Vec<Ranked> {
    let m = m.min(entries.len());
    if m == 0 {
        return Vec::new();
    }
    if m < entries.len() {
        entries.select_nth_unstable_by(m - 1, rank_cmp);
        let h = nudged(entries[m - 1].0);
        let (head, tail) = entries.split_at_mut(m);
        let mut out: Vec<Ranked> = head.to_vec();
        out.extend(tail.iter().filter(|e| e.0 <= h));
        out.sort_by(rank_cmp);
        out
    } else {
        entries.sort_by(rank_cmp);
        entries
    }
}

/// Effective candidate grid: each κ capped at `n_observed - 1`, deduplicated.
pub fn effective_kappas(kappas: &[usize], n_observed: usize) -> Result<Vec<usize>> {
    if n_observed < 2 {
        return Err(Error::InsufficientData(format!(
            "κ-NN cross-validation needs at least 2 observed responses, got {n_observed}"
        )));
    }
    if kappas.is_empty() || kappas.contains(&0) {
        return Err(Error::InvalidParameter("κ grid must be nonempty and positive".into()));
    }
    let mut out: Vec<usize> = kappas.iter().map(|&k| k.min(n_observed - 1)).collect();
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Resolves the bandwidth at `x` for a dataset.
pub fn resolve_bandwidth(
    ds: &FunctionalDataset,
    x: &Curve,
    rule: &BandwidthRule,
    semimetric: SemiMetric,
    kernel: Kernel,
) -> Result<f64> {
    if let BandwidthRule::Fixed(h) = rule {
        return validate_fixed(*h);
    }
    let index = MetricIndex::build(ds, semimetric)?;
    let dx = index.distances_to(x)?;
    Ok(select(&index, &ds.responses(), &dx, rule, kernel, &CvOptions::default())?.h)
}

fn validate_fixed(h: f64) -> Result<f64> {
    if h.is_finite() && h > 0.0 {
        Ok(h)
    } else {
        Err(Error::InvalidParameter(format!("fixed bandwidth must be > 0, got {h}")))
    }
}

/// Bandwidth at a query whose distances `dx` to the indexed curves are known.
pub fn select(
    index: &MetricIndex,
    responses: &[Option<f64>],
    dx: &[f64],
    rule: &BandwidthRule,
    kernel: Kernel,
    cv: &CvOptions,
) -> Result<BandwidthChoice> {
    let kappas = match rule {
        BandwidthRule::Fixed(h) => {
            return Ok(BandwidthChoice { h: validate_fixed(*h)?, kappa: None, scores: Vec::new() })
        }
        BandwidthRule::Knn(k) => k,
    };
    debug_assert_eq!(responses.len(), index.len());
    let n_obs = responses.iter().filter(|y| y.is_some()).count();
    let kappas = effective_kappas(kappas, n_obs)?;
    let kmax = *kappas.last().expect("nonempty grid");

    let observed: Vec<Ranked> = dx
        .iter()
        .enumerate()
        .filter(|(k, _)| responses[*k].is_some())
        .map(|(k, &d)| (d, k))
        .collect();
    let near_x = nearest_sorted(observed, kmax);
    let h_x: Vec<f64> = kappas.iter().map(|&k| nudged(near_x[k - 1].0)).collect();

    // neighbours of x to score, per κ
    // (members, number of neighbours they stand for)
    let members: Vec<(Vec<usize>, usize)> = h_x
        .iter()
        .map(|&h| {
            let inside: Vec<usize> = near_x.iter().take_while(|e| e.0 <= h).map(|e| e.1).collect();
            let total = inside.len();
            match cv.max_points {
                Some(m) if m > 0 && total > m => ((0..m).map(|i| inside[i * total / m]).collect(), total),
                _ => (inside, total),
            }
        })
        .collect();
    let mut needed: Vec<usize> = members.iter().flat_map(|m| m.0.iter()).copied().collect();
    needed.sort_unstable();
    needed.dedup();

    // left-out prediction of every needed neighbour, for every κ
    let mut row = Vec::with_capacity(index.len());
    let mut preds: Vec<Vec<f64>> = Vec::with_capacity(needed.len());
    for &j in &needed {
        index.distances_from(j, &mut row);
        let lo = j.saturating_sub(cv.exclusion);
        let hi = j + cv.exclusion;
        let pool: Vec<Ranked> = row
            .iter()
            .enumerate()
            .filter(|(k, _)| responses[*k].is_some() && (*k < lo || *k > hi))
            .map(|(k, &d)| (d, k))
            .collect();
        let near = nearest_sorted(pool, kmax);
        let p = kappas
            .iter()
            .map(|&kappa| {
                if near.is_empty() {
                    return f64::NAN;
                }
                let h = nudged(near[kappa.min(near.len()) - 1].0);
                let (mut num, mut den) = (0.0, 0.0);
                for &(d, k) in near.iter().take_while(|e| e.0 <= h) {
                    let w = kernel.eval_unchecked(d / h);
                    num += w * responses[k].expect("pool holds observed responses");
                    den += w;
                }
                if den > 0.0 {
                    num / den
                } else {
                    f64::NAN
                }
            })
            .collect();
        preds.push(p);
    }

    let mut scores = Vec::with_capacity(kappas.len());
    let mut best: Option<(usize, f64)> = None;
    for (ki, &kappa) in kappas.iter().enumerate() {
        let mut acc = 0.0;
        let mut cnt = 0usize;
        let (scored, total) = &members[ki];
        for &j in scored {
            let slot = needed.binary_search(&j).expect("member was collected");
            let pred = preds[slot][ki];
            if pred.is_finite() {
                let r = responses[j].expect("members are observed") - pred;
                acc += r * r;
                cnt += 1;
            }
        }
        if cnt == 0 {
            continue;
        }
        let score = match cv.score {
            CvScore::Sum => acc * (*total as f64 / scored.len() as f64),
            CvScore::Mean => acc / cnt as f64,
        };
        scores.push((kappa, score));
        if best.is_none_or(|(_, s)| score < s) {
            best = Some((ki, score));
        }
    }
    let (ki, _) = best.ok_or_else(|| {
        Error::InsufficientData("no κ candidate could be cross-validated".into())
    })?;
    Ok(BandwidthChoice { h: h_x[ki], kappa: Some(kappas[ki]), scores })
}
