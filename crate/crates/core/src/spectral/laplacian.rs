use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::correlation::{chordal_distance, CorrelationMatrix};
use crate::error::{Error, Result};
use crate::stats::serde_rows;

/// Relative numeric-zero factor: an eigenvalue counts as nonzero when it
/// exceeds this fraction of the largest eigenvalue.
pub const DEFAULT_ZERO_TOLERANCE: f64 = 1e-8;

/// Ascending eigendecomposition of the normalized correlation-network Laplacian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplacianSpectrum {
    pub eigenvalues: Vec<f64>,
    /// Column `j` pairs with `eigenvalues[j]`.
    #[serde(with = "serde_rows")]
    pub eigenvectors: DMatrix<f64>,
    /// Absolute cutoff below which an eigenvalue is treated as zero.
    pub zero_tolerance: f64,
    /// Row sums of the affinity matrix.
    pub degrees: Vec<f64>,
}

impl LaplacianSpectrum {
    pub fn size(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn nonzero_eigenvalues(&self) -> impl Iterator<Item = f64> + '_ {
        self.eigenvalues
            .iter()
            .copied()
            .filter(move |&l| l > self.zero_tolerance)
    }
}

/// Affinity `exp(-d^2)` with `d` the half chordal distance.
pub fn affinity(rho: &CorrelationMatrix) -> DMatrix<f64> {
    chordal_distance(rho).map(|d| (-d * d).exp())
}

/// `L = I - D^{-1/2} W D^{-1/2}` and the degree vector `diag(D)`.
pub fn laplacian_matrix(rho: &CorrelationMatrix) -> (DMatrix<f64>, Vec<f64>) {
    let w = affinity(rho);
    laplacian_from_affinity(&w)
}

fn laplacian_from_affinity(w: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let k = w.nrows();
    let degrees: Vec<f64> = (0..k).map(|i| w.row(i).sum()).collect();
    let inv_sqrt: Vec<f64> = degrees.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut l = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let v = -w[(i, j)] * inv_sqrt[i] * inv_sqrt[j];
            l[(i, j)] = if i == j { 1.0 + v } else { v };
        }
    }
    // exact symmetry
    for i in 0..k {
        for j in (i + 1)..k {
            let v = 0.5 * (l[(i, j)] + l[(j, i)]);
            l[(i, j)] = v;
            l[(j, i)] = v;
        }
    }
    (l, degrees)
}

fn absolute_tolerance(eigenvalues: &[f64], relative: f64) -> f64 {
    let max = eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
    relative * max
}

/// Full spectrum of the Laplacian, eigenvalues ascending.
pub fn laplacian(
    rho: &CorrelationMatrix,
    relative_zero_tolerance: f64,
) -> Result<LaplacianSpectrum> {
    let k = rho.size();
    if k < 2 {
        return Err(Error::InvalidArgument(
            "a Laplacian spectrum needs at least two series".into(),
        ));
    }
    let (l, degrees) = laplacian_matrix(rho);
    let eig = SymmetricEigen::try_new(l, f64::EPSILON, 1000 * k + 10_000)
        .ok_or(Error::NoConvergence(k))?;
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .total_cmp(&eig.eigenvalues[b])
            .then(a.cmp(&b))
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&j| eig.eigenvalues[j]).collect();
    let mut eigenvectors = DMatrix::zeros(k, k);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        // sign convention: largest-magnitude entry positive
        let imax = col.iamax();
        if col[imax] < 0.0 {
            col.neg_mut();
        }
        eigenvectors.set_column(dst, &col);
    }
    let zero_tolerance = absolute_tolerance(&eigenvalues, relative_zero_tolerance);
    Ok(LaplacianSpectrum {
        eigenvalues,
        eigenvectors,
        zero_tolerance,
        degrees,
    })
}

/// Ascending Laplacian eigenvalues of a raw correlation matrix, no eigenvectors.
pub(crate) fn laplacian_eigenvalues(rho: &DMatrix<f64>) -> Vec<f64> {
    let w = rho.map(|r| {
        let d = (r.clamp(-1.0, 1.0).acos() / 2.0).sin();
        (-d * d).exp()
    });
    let (l, _) = laplacian_from_affinity(&w);
    let mut ev: Vec<f64> = l.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Number of eigenvalues strictly between the numeric zero and `threshold`.
pub fn count_significant(spectrum: &LaplacianSpectrum, threshold: f64) -> usize {
    spectrum
        .nonzero_eigenvalues()
        .filter(|&l| l < threshold)
        .count()
}
