//! One partition-scrubbing step: characteristic series, cluster pressures and
//! the normalized residual panel.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::panel::SeriesPanel;
use crate::spectral::{cluster_means, correlation_of_rows, Partition};
use crate::stats::{self, serde_rows};

/// Reciprocal condition number of the pressure system below which the
/// characteristic series are treated as linearly dependent.
pub const PROJECTION_FAILURE_RCOND: f64 = 1e-12;

/// A residual whose standard deviation falls below this fraction of the
/// input series' standard deviation is considered fully explained.
pub const RESIDUAL_DEGENERACY: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScrubFailureKind {
    ProjectionFailure,
    DegenerateCluster,
}

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[error("{kind:?}: {detail}")]
pub struct ScrubFailure {
    pub kind: ScrubFailureKind,
    pub detail: String,
    /// Offending cluster or entity indices.
    pub indices: Vec<usize>,
    pub condition_estimate: Option<f64>,
}

/// Cluster-mean series, row `k` for cluster `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicSet {
    #[serde(with = "serde_rows")]
    pub series: DMatrix<f64>,
    pub partition: Partition,
}

impl CharacteristicSet {
    pub fn len(&self) -> usize {
        self.series.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.series.nrows() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScrubResult {
    /// `N x K`; entry `(i, k)` is the pressure of cluster `k` on entity `i`.
    #[serde(with = "serde_rows")]
    pub pressures: DMatrix<f64>,
    pub residual_means: Vec<f64>,
    pub residual_sds: Vec<f64>,
    pub residual_panel: SeriesPanel,
    pub characteristic: CharacteristicSet,
    pub condition_estimate: f64,
}

pub fn characteristic_series(
    panel: &SeriesPanel,
    partition: &Partition,
) -> Result<CharacteristicSet> {
    if partition.len() != panel.n_entities() {
        return Err(Error::InvalidArgument(format!(
            "partition covers {} entities, panel has {}",
            partition.len(),
            panel.n_entities()
        )));
    }
    Ok(CharacteristicSet {
        series: cluster_means(&panel.values, partition),
        partition: partition.clone(),
    })
}

/// Reciprocal 2-norm condition number (`0` for a singular matrix).
pub fn reciprocal_condition(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if !(max > 0.0) || !min.is_finite() {
        0.0
    } else {
        min / max
    }
}

/// Solves `A tau = b` per entity, with `A[j][k] = corr(V_j, V_k) sd(V_k)` and
/// `b[j] = corr(V_j, D) sd(D)` (given as columns of `corr_vd_times_sd`).
pub fn pressures_from_moments(
    corr_vv: &DMatrix<f64>,
    sd_v: &[f64],
    corr_vd_times_sd: &DMatrix<f64>,
) -> std::result::Result<(DMatrix<f64>, f64), ScrubFailure> {
    let k = sd_v.len();
    let a = DMatrix::from_fn(k, k, |j, l| corr_vv[(j, l)] * sd_v[l]);
    let rcond = reciprocal_condition(&a);
    if !(rcond >= PROJECTION_FAILURE_RCOND) {
        return Err(ScrubFailure {
            kind: ScrubFailureKind::ProjectionFailure,
            detail: format!(
                "characteristic series are numerically dependent (rcond {rcond:.3e} < {PROJECTION_FAILURE_RCOND:e})"
            ),
            indices: (0..k).collect(),
            condition_estimate: Some(rcond),
        });
    }
    let solved = a.lu().solve(corr_vd_times_sd).ok_or_else(|| ScrubFailure {
        kind: ScrubFailureKind::ProjectionFailure,
        detail: "pressure system is singular".into(),
        indices: (0..k).collect(),
        condition_estimate: Some(rcond),
    })?;
    // solved is K x N; callers want N x K
    Ok((solved.transpose(), rcond))
}

/// Cluster pressures of every entity on the characteristic series.
pub fn solve_pressures(
    panel: &SeriesPanel,
    charset: &CharacteristicSet,
) -> std::result::Result<(DMatrix<f64>, f64), ScrubFailure> {
    let v = &charset.series;
    let k = v.nrows();
    let t = v.ncols();
    let sd_v: Vec<f64> = (0..k)
        .map(|j| stats::sample_sd(&stats::row_vec(v, j)))
        .collect();
    let corr_vv = correlation_of_rows(v).map_err(|j| ScrubFailure {
        kind: ScrubFailureKind::DegenerateCluster,
        detail: format!("characteristic series {j} is constant"),
        indices: vec![j],
        condition_estimate: None,
    })?;

    // b_j(i) = corr(V_j, D_i) sd(D_i) = cov(V_j, D_i) / sd(V_j); the covariance
    // form stays defined for a constant D_i.
    let centre = |m: &DMatrix<f64>| {
        let mut c = m.clone();
        for i in 0..c.nrows() {
            let mean = c.row(i).sum() / t as f64;
            c.row_mut(i).add_scalar_mut(-mean);
        }
        c
    };
    let vc = centre(v);
    let dc = centre(&panel.values);
    let mut b = (&vc * dc.transpose()) / (t as f64 - 1.0);
    for (j, sd) in sd_v.iter().enumerate() {
        b.row_mut(j).scale_mut(1.0 / sd);
    }
    pressures_from_moments(&corr_vv, &sd_v, &b)
}

/// One scrubbing iteration: `D = sum_k tau_k V_k + R`, then `D' = (R - m) / sd`.
pub fn scrub(
    panel: &SeriesPanel,
    partition: &Partition,
) -> std::result::Result<ScrubResult, Error> {
    let charset = characteristic_series(panel, partition)?;
    let (pressures, condition_estimate) = solve_pressures(panel, &charset)?;
    let fitted = &pressures * &charset.series;
    let residual = &panel.values - fitted;

    let n = panel.n_entities();
    let mut means = Vec::with_capacity(n);
    let mut sds = Vec::with_capacity(n);
    let mut normalized = residual.clone();
    for i in 0..n {
        let row = stats::row_vec(&residual, i);
        let m = stats::mean(&row);
        let s = stats::sample_sd(&row);
        let scale = stats::sample_sd(&panel.row(i));
        if !(s > RESIDUAL_DEGENERACY * scale) || !(s > 0.0) {
            return Err(ScrubFailure {
                kind: ScrubFailureKind::DegenerateCluster,
                detail: format!(
                    "entity {} is fully explained by the characteristic series (residual sd {s:.3e})",
                    panel.entities[i]
                ),
                indices: vec![i],
                condition_estimate: Some(condition_estimate),
            }
            .into());
        }
        for (t, x) in row.iter().enumerate() {
            normalized[(i, t)] = (x - m) / s;
        }
        means.push(m);
        sds.push(s);
    }
    let mut residual_panel = panel.with_values(normalized);
    residual_panel.iteration = panel.iteration + 1;
    Ok(ScrubResult {
        pressures,
        residual_means: means,
        residual_sds: sds,
        residual_panel,
        characteristic: charset,
        condition_estimate,
    })
}
