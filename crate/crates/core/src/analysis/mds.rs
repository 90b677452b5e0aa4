use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::serde_rows;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdsEmbedding {
    /// `n x dims`, one row per point.
    #[serde(with = "serde_rows")]
    pub coords: DMatrix<f64>,
    /// Leading eigenvalues of the double-centred matrix, descending.
    pub eigenvalues: Vec<f64>,
    /// True when fewer than `dims` eigenvalues were positive; missing axes are zero.
    pub reduced_rank: bool,
}

/// Classical (Torgerson) multidimensional scaling.
///
/// Axis signs are fixed so that the first point with a non-negligible
/// coordinate on each axis is positive.
pub fn classical_mds(dist: &DMatrix<f64>, dims: usize) -> Result<MdsEmbedding> {
    let n = dist.nrows();
    if dist.ncols() != n {
        return Err(Error::InvalidArgument(
            "distance matrix must be square".into(),
        ));
    }
    if dims == 0 {
        return Err(Error::InvalidArgument("dims must be at least 1".into()));
    }
    let scale = dist.amax();
    for i in 0..n {
        if dist[(i, i)].abs() > 1e-12 * scale.max(1.0) {
            return Err(Error::InvalidArgument(
                "distance matrix diagonal must be zero".into(),
            ));
        }
        for j in 0..n {
            let (a, b) = (dist[(i, j)], dist[(j, i)]);
            if !a.is_finite() || a < 0.0 || (a - b).abs() > 1e-12 * scale.max(1.0) {
                return Err(Error::InvalidArgument(
                    "distances must be finite, non-negative and symmetric".into(),
                ));
            }
        }
    }
    if n == 0 {
        return Ok(MdsEmbedding {
            coords: DMatrix::zeros(0, dims),
            eigenvalues: Vec::new(),
            reduced_rank: true,
        });
    }

    // B = -1/2 J D^2 J
    let sq = dist.map(|d| d * d);
    let row_means: Vec<f64> = (0..n).map(|i| sq.row(i).mean()).collect();
    let grand = sq.mean();
    let b = DMatrix::from_fn(n, n, |i, j| {
        -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand)
    });
    let b = 0.5 * (&b + b.transpose());
    let eig = SymmetricEigen::try_new(b, f64::EPSILON, 1000 * n + 10_000)
        .ok_or(Error::NoConvergence(n))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| {
        eig.eigenvalues[c]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&c))
    });

    let top = eig.eigenvalues[order[0]].max(0.0);
    let tol = 1e-10 * top.max(f64::MIN_POSITIVE);
    let mut coords = DMatrix::zeros(n, dims);
    let mut eigenvalues = Vec::with_capacity(dims);
    let mut reduced_rank = false;
    for axis in 0..dims {
        let Some(&src) = order.get(axis) else {
            reduced_rank = true;
            eigenvalues.push(0.0);
            continue;
        };
        let lambda = eig.eigenvalues[src];
        eigenvalues.push(lambda);
        if !(lambda > tol) {
            reduced_rank = true;
            continue;
        }
        let mut col = eig.eigenvectors.column(src) * lambda.sqrt();
        let cut = 1e-9 * col.amax();
        if let Some(first) = col.iter().find(|v| v.abs() > cut) {
            if *first < 0.0 {
                col.neg_mut();
            }
        }
        coords.set_column(axis, &col);
    }
    Ok(MdsEmbedding {
        coords,
        eigenvalues,
        reduced_rank,
    })
}

/// Euclidean distances between the rows of `coords`.
pub fn pairwise_distances(coords: &DMatrix<f64>) -> DMatrix<f64> {
    let n = coords.nrows();
    DMatrix::from_fn(n, n, |i, j| (coords.row(i) - coords.row(j)).norm())
}
