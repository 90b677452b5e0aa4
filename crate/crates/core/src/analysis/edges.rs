use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
}

/// Number of pairs in the bottom `fraction` of `pairs`, at least one.
pub fn edge_budget(pairs: usize, fraction: f64) -> usize {
    (((fraction * pairs as f64) + 1e-9).floor() as usize).clamp(1, pairs.max(1))
}

/// Pairs whose Euclidean distance is within the bottom `fraction` of all
/// pairwise distances; pairs tied with the cutoff distance are included.
/// Edges are reported with `a < b`, sorted by distance then index.
pub fn near_neighbor_edges(coords: &DMatrix<f64>, fraction: f64) -> Result<Vec<Edge>> {
    let n = coords.nrows();
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two points".into()));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let mut all = Vec::with_capacity(n * (n - 1) / 2);
    for a in 0..n {
        for b in (a + 1)..n {
            all.push(Edge {
                a,
                b,
                distance: (coords.row(a) - coords.row(b)).norm(),
            });
        }
    }
    all.sort_by(|x, y| {
        x.distance
            .total_cmp(&y.distance)
            .then(x.a.cmp(&y.a))
            .then(x.b.cmp(&y.b))
    });
    let budget = edge_budget(all.len(), fraction);
    let cutoff = all[budget - 1].distance;
    Ok(all
        .into_iter()
        .take_while(|e| e.distance <= cutoff)
        .collect())
}
