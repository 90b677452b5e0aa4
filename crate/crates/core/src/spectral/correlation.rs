use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::SeriesPanel;
use crate::stats::serde_rows;

/// Pearson correlations between labelled series: symmetric, unit diagonal,
/// entries clamped to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    #[serde(with = "serde_rows")]
    pub rho: DMatrix<f64>,
}

impl CorrelationMatrix {
    /// Wraps a raw matrix, enforcing the invariants (symmetrize, clamp, unit diagonal).
    pub fn new(labels: Vec<String>, rho: DMatrix<f64>) -> Result<Self> {
        let k = rho.nrows();
        if rho.ncols() != k || labels.len() != k {
            return Err(Error::InvalidArgument(format!(
                "correlation matrix is {}x{} with {} labels",
                rho.nrows(),
                rho.ncols(),
                labels.len()
            )));
        }
        if rho.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite correlation".into()));
        }
        let mut out = DMatrix::identity(k, k);
        for i in 0..k {
            for j in (i + 1)..k {
                let v = (0.5 * (rho[(i, j)] + rho[(j, i)])).clamp(-1.0, 1.0);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        Ok(CorrelationMatrix { labels, rho: out })
    }

    pub fn size(&self) -> usize {
        self.rho.nrows()
    }
}

/// Row-standardized copy of `values` scaled so that `Z * Z^T` is the correlation matrix.
/// Fails with the index of the first constant row.
pub(crate) fn standardized_rows(values: &DMatrix<f64>) -> std::result::Result<DMatrix<f64>, usize> {
    let (n, t) = values.shape();
    let mut z = values.clone();
    for i in 0..n {
        let mean = z.row(i).sum() / t as f64;
        let mut ss = 0.0;
        for j in 0..t {
            let c = z[(i, j)] - mean;
            z[(i, j)] = c;
            ss += c * c;
        }
        let norm = ss.sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(i);
        }
        // relative guard: a row whose deviations are pure rounding noise is constant
        let scale = values.row(i).amax().max(f64::MIN_POSITIVE);
        if norm <= 1e-14 * scale * (t as f64).sqrt() {
            return Err(i);
        }
        z.row_mut(i).scale_mut(1.0 / norm);
    }
    Ok(z)
}

/// Correlation of the rows of a raw matrix.
pub(crate) fn correlation_of_rows(
    values: &DMatrix<f64>,
) -> std::result::Result<DMatrix<f64>, usize> {
    let z = standardized_rows(values)?;
    let mut rho = &z * z.transpose();
    let k = rho.nrows();
    for i in 0..k {
        rho[(i, i)] = 1.0;
        for j in (i + 1)..k {
            let v = (0.5 * (rho[(i, j)] + rho[(j, i)])).clamp(-1.0, 1.0);
            rho[(i, j)] = v;
            rho[(j, i)] = v;
        }
    }
    Ok(rho)
}

/// Pearson correlation of the panel's rows.
pub fn correlation(panel: &SeriesPanel) -> Result<CorrelationMatrix> {
    if panel.n_times() < 2 {
        return Err(Error::InvalidArgument(
            "correlation needs at least two observations".into(),
        ));
    }
    let rho = correlation_of_rows(&panel.values).map_err(|i| Error::DegenerateSeries {
        entity: panel.entities[i].clone(),
    })?;
    Ok(CorrelationMatrix {
        labels: panel.entities.clone(),
        rho,
    })
}

/// Half chordal distance on the correlation sphere, `sin(acos(rho) / 2)`, entrywise.
pub fn chordal_distance(rho: &CorrelationMatrix) -> DMatrix<f64> {
    let mut d = rho.rho.map(|r| (r.clamp(-1.0, 1.0).acos() / 2.0).sin());
    d.fill_diagonal(0.0);
    d
}
