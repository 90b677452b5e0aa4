use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::labels::{EntityLabel, Sector};
use crate::error::{Error, Result};
use crate::panel::SeriesPanel;
use crate::scrub::{solve_pressures, CharacteristicSet};
use crate::spectral::Partition;
use crate::stats;

/// Default window: one trading year.
pub const DEFAULT_WINDOW: usize = 252;
/// Default step: one trading month.
pub const DEFAULT_STEP: usize = 21;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorPressure {
    pub members: usize,
    /// Mean market pressure of the sector's members, one value per window.
    pub raw: Vec<f64>,
    /// `raw` standardized to mean 0, sd 1 across windows.
    pub normalized: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureSeries {
    pub window_length: usize,
    pub step: usize,
    /// `(first, last)` time label of each window.
    pub windows: Vec<(String, String)>,
    pub sectors: BTreeMap<Sector, SectorPressure>,
    /// Always `"mean0-sd1"`: each sector series is standardized on its own.
    pub normalization: String,
    pub warnings: Vec<String>,
}

/// Number of windows of length `window` advanced by `step` over `t` observations.
pub fn window_count(t: usize, window: usize, step: usize) -> usize {
    if window == 0 || step == 0 || window > t {
        0
    } else {
        (t - window) / step + 1
    }
}

/// Daily mean of the member series: the pressure series of a subset.
pub fn subset_tau(panel: &SeriesPanel, members: &[usize]) -> Vec<f64> {
    (0..panel.n_times())
        .map(|t| members.iter().map(|&i| panel.values[(i, t)]).sum::<f64>() / members.len() as f64)
        .collect()
}

/// Per-entity pressure of the window's market-mean series (the one-cluster solve).
fn window_market_pressure(window: &SeriesPanel) -> Result<Vec<f64>> {
    let n = window.n_entities();
    let market = CharacteristicSet {
        series: DMatrix::from_row_slice(
            1,
            window.n_times(),
            &subset_tau(window, &(0..n).collect::<Vec<_>>()),
        ),
        partition: Partition::trivial(n),
    };
    let (tau, _) = solve_pressures(window, &market)?;
    Ok(tau.column(0).iter().copied().collect())
}

fn standardize(xs: &[f64]) -> Option<Vec<f64>> {
    let m = stats::mean(xs);
    let s = stats::sample_sd(xs);
    (s > 1e-12 * m.abs().max(1.0) && s.is_finite())
        .then(|| xs.iter().map(|x| (x - m) / s).collect())
}

/// Rolling sector pressure: in each window every entity's pressure from the
/// window's market mean is computed, averaged within each sector, and each
/// sector's series is then standardized across windows.
pub fn sector_pressure(
    panel: &SeriesPanel,
    labels: &[EntityLabel],
    window: usize,
    step: usize,
) -> Result<PressureSeries> {
    let t = panel.n_times();
    if labels.len() != panel.n_entities() {
        return Err(Error::InvalidArgument(format!(
            "{} labels for {} entities",
            labels.len(),
            panel.n_entities()
        )));
    }
    if step == 0 || window < 2 || window > t {
        return Err(Error::InvalidArgument(format!(
            "need 2 <= window <= {t} and step >= 1 (got window {window}, step {step})"
        )));
    }
    let count = window_count(t, window, step);
    let starts: Vec<usize> = (0..count).map(|w| w * step).collect();

    let per_window: Vec<Vec<f64>> = starts
        .par_iter()
        .map(|&s| window_market_pressure(&panel.window(s, s + window)))
        .collect::<Result<_>>()?;

    let mut warnings = Vec::new();
    let mut sectors = BTreeMap::new();
    for sector in Sector::ALL {
        let members: Vec<usize> = (0..labels.len())
            .filter(|&i| labels[i].sector == sector)
            .collect();
        if members.is_empty() {
            continue;
        }
        let raw: Vec<f64> = per_window
            .iter()
            .map(|tau| members.iter().map(|&i| tau[i]).sum::<f64>() / members.len() as f64)
            .collect();
        let normalized = standardize(&raw).unwrap_or_else(|| {
            warnings.push(format!(
                "sector {sector}: pressure series has no variation across {count} window(s); normalized to 0"
            ));
            vec![0.0; raw.len()]
        });
        sectors.insert(
            sector,
            SectorPressure {
                members: members.len(),
                raw,
                normalized,
            },
        );
    }
    let windows = starts
        .iter()
        .map(|&s| (panel.times[s].clone(), panel.times[s + window - 1].clone()))
        .collect();
    Ok(PressureSeries {
        window_length: window,
        step,
        windows,
        sectors,
        normalization: "mean0-sd1".into(),
        warnings,
    })
}
