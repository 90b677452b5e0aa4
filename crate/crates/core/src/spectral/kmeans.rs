//! Seeded k-means++ / Lloyd clustering and the spectral embedding it runs on.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::laplacian::LaplacianSpectrum;
use super::partition::Partition;
use crate::error::{Error, Result};
use crate::stats::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub seed: u64,
    /// Independent k-means++ initializations; the lowest-WCSS run wins.
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            seed: 0,
            restarts: 20,
            max_iter: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    /// Raw labels in `0..k` (not canonicalized).
    pub labels: Vec<usize>,
    pub centroids: DMatrix<f64>,
    /// Within-cluster sum of squared distances.
    pub wcss: f64,
}

fn sq_dist(points: &DMatrix<f64>, i: usize, centroids: &DMatrix<f64>, c: usize) -> f64 {
    let mut s = 0.0;
    for d in 0..points.ncols() {
        let diff = points[(i, d)] - centroids[(c, d)];
        s += diff * diff;
    }
    s
}

/// Nearest centroid; ties go to the lowest centroid index.
fn nearest(points: &DMatrix<f64>, i: usize, centroids: &DMatrix<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.nrows() {
        let d = sq_dist(points, i, centroids, c);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_init<R: Rng>(points: &DMatrix<f64>, k: usize, rng: &mut R) -> DMatrix<f64> {
    let (n, dim) = points.shape();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut d2: Vec<f64> = (0..n)
        .map(|i| {
            let c = chosen[0];
            (0..dim)
                .map(|d| (points[(i, d)] - points[(c, d)]).powi(2))
                .sum()
        })
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    if target < w {
                        pick = Some(i);
                        break;
                    }
                    target -= w;
                }
            }
            // rounding can leave the target past the last positive weight
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            // all remaining points coincide with a centre
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for i in 0..n {
            let d: f64 = (0..dim)
                .map(|d| (points[(i, d)] - points[(next, d)]).powi(2))
                .sum();
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    DMatrix::from_fn(k, dim, |c, d| points[(chosen[c], d)])
}

fn lloyd(points: &DMatrix<f64>, mut centroids: DMatrix<f64>, max_iter: usize) -> KMeansFit {
    let (n, dim) = points.shape();
    let k = centroids.nrows();
    let mut labels = vec![usize::MAX; n];
    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        let mut dists = vec![0.0; n];
        for i in 0..n {
            let (c, d) = nearest(points, i, &centroids);
            dists[i] = d;
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
        }
        // repopulate empty clusters with the worst-fitted point
        let mut counts = vec![0usize; k];
        for &l in &labels {
            counts[l] += 1;
        }
        for c in 0..k {
            if counts[c] == 0 {
                let mut far = None;
                for i in 0..n {
                    if counts[labels[i]] > 1 && far.is_none_or(|(_, d)| dists[i] > d) {
                        far = Some((i, dists[i]));
                    }
                }
                if let Some((i, _)) = far {
                    counts[labels[i]] -= 1;
                    labels[i] = c;
                    counts[c] = 1;
                    dists[i] = 0.0;
                    changed = true;
                }
            }
        }
        let mut sums = DMatrix::<f64>::zeros(k, dim);
        for i in 0..n {
            for d in 0..dim {
                sums[(labels[i], d)] += points[(i, d)];
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for d in 0..dim {
                    centroids[(c, d)] = sums[(c, d)] / counts[c] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let wcss = (0..n)
        .map(|i| sq_dist(points, i, &centroids, labels[i]))
        .sum();
    KMeansFit {
        labels,
        centroids,
        wcss,
    }
}

/// Best-of-`restarts` k-means on the rows of `points`.
pub fn kmeans(points: &DMatrix<f64>, k: usize, cfg: &KMeansConfig) -> Result<KMeansFit> {
    let n = points.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "k-means needs 1 <= k <= {n}, got {k}"
        )));
    }
    let restarts = cfg.restarts.max(1);
    let fits: Vec<KMeansFit> = (0..restarts as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(cfg.seed, r);
            let init = plus_plus_init(points, k, &mut rng);
            lloyd(points, init, cfg.max_iter)
        })
        .collect();
    // first minimum wins, so ties resolve to the lowest restart index
    let best = fits
        .into_iter()
        .reduce(|a, b| if b.wcss < a.wcss { b } else { a })
        .expect("at least one restart");
    Ok(best)
}

/// Rows of the `k` lowest eigenvectors, each scaled to unit length.
pub fn spectral_embedding(spectrum: &LaplacianSpectrum, k: usize) -> Result<DMatrix<f64>> {
    let n = spectrum.size();
    if k < 1 || k > n {
        return Err(Error::InvalidArgument(format!(
            "embedding dimension must lie in 1..={n}, got {k}"
        )));
    }
    let mut v = spectrum.eigenvectors.columns(0, k).into_owned();
    for i in 0..n {
        let norm = v.row(i).norm();
        if !(norm > 1e-300) {
            return Err(Error::DegenerateEmbedding { row: i });
        }
        v.row_mut(i).scale_mut(1.0 / norm);
    }
    Ok(v)
}

/// Spectral clustering into (at most) `k` clusters, canonically labelled.
pub fn spectral_kmeans(
    spectrum: &LaplacianSpectrum,
    k: usize,
    cfg: &KMeansConfig,
) -> Result<Partition> {
    if k < 2 || k > spectrum.size() {
        return Err(Error::InvalidArgument(format!(
            "spectral k-means needs 2 <= k <= {}, got {k}",
            spectrum.size()
        )));
    }
    let embedding = spectral_embedding(spectrum, k)?;
    let fit = kmeans(&embedding, k, cfg)?;
    Ok(Partition::canonical(&fit.labels))
}
