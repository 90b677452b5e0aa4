use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::correlation::{correlation_of_rows, CorrelationMatrix};
use super::kmeans::{spectral_kmeans, KMeansConfig};
use super::laplacian::{count_significant, laplacian};
use super::null::{NullModel, NullPanel};
use super::partition::Partition;
use crate::error::{Error, Result};
use crate::panel::SeriesPanel;
use crate::stats::derive_seed;

/// One level of the hierarchy, expressed over the original entities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub partition: Partition,
    /// Nonzero Laplacian eigenvalues below the GE threshold.
    pub significant: usize,
    pub threshold: f64,
    /// Number of series that were clustered to form this level.
    pub input_series: usize,
    pub kmeans_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelStack {
    /// Finest first.
    pub levels: Vec<Level>,
    /// Series length used for every GE comparison.
    pub source_length: usize,
}

impl LevelStack {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Level by 1-based index.
    pub fn level(&self, index: usize) -> Option<&Level> {
        index.checked_sub(1).and_then(|i| self.levels.get(i))
    }
}

/// Clusters implied by a significance count: the zero eigenvalue's trivial
/// direction accounts for one cluster, each significant eigenvalue for another.
pub fn clusters_for(significant: usize) -> usize {
    significant + 1
}

/// Mean series of each cluster, in label order.
pub fn cluster_means(values: &DMatrix<f64>, partition: &Partition) -> DMatrix<f64> {
    let k = partition.num_clusters();
    let t = values.ncols();
    let mut sums = DMatrix::zeros(k, t);
    let sizes = partition.sizes();
    for i in 0..values.nrows() {
        let c = partition.label(i);
        for j in 0..t {
            sums[(c, j)] += values[(i, j)];
        }
    }
    for (c, &size) in sizes.iter().enumerate() {
        sums.row_mut(c).scale_mut(1.0 / size as f64);
    }
    sums
}

/// Hierarchical spectral clustering of the panel's rows.
///
/// Level 1 clusters the entities; every further level clusters the mean
/// series of the previous level's clusters, until fewer than two clusters
/// (or no strict coarsening) would result. Fails with
/// [`Error::PartitioningFailure`] when level 1 finds no structure beyond the
/// GE null.
///
/// A panel with `iteration > 0` is a residual of the market scrub, so it is
/// compared against GE panels that went through the same projection.
pub fn build_levels(
    panel: &SeriesPanel,
    null: &NullModel,
    kmeans: &KMeansConfig,
) -> Result<LevelStack> {
    let n = panel.n_entities();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "hierarchical clustering needs at least two entities".into(),
        ));
    }
    let t = panel.n_times();
    let zero_tol = null.config().zero_tolerance;
    let variant = if panel.iteration > 0 {
        NullPanel::MarketScrubbed
    } else {
        NullPanel::Raw
    };
    let mut levels: Vec<Level> = Vec::new();
    let mut series = panel.values.clone();
    // entity -> index into `series`
    let mut entity_map = Partition::new((0..n).collect())?;

    loop {
        let depth = levels.len() + 1;
        let k_in = series.nrows();
        if k_in < 2 {
            break;
        }
        let rho = match correlation_of_rows(&series) {
            Ok(r) => r,
            Err(row) if depth == 1 => {
                return Err(Error::DegenerateSeries {
                    entity: panel.entities[row].clone(),
                })
            }
            // a constant cluster-mean series carries no correlation structure
            Err(_) => break,
        };
        let labels = (0..k_in).map(|i| i.to_string()).collect();
        let spectrum = laplacian(&CorrelationMatrix { labels, rho }, zero_tol)?;
        let threshold = null.threshold_for(k_in, t, variant)?;
        let significant = count_significant(&spectrum, threshold);
        let k = clusters_for(significant);
        if k < 2 {
            if depth == 1 {
                return Err(Error::PartitioningFailure {
                    significant,
                    threshold,
                });
            }
            break;
        }
        if depth > 1 && k >= k_in {
            break;
        }
        let seed = derive_seed(kmeans.seed, depth as u64);
        let local = spectral_kmeans(&spectrum, k.min(k_in), &KMeansConfig { seed, ..*kmeans })?;
        if local.num_clusters() < 2 || (depth > 1 && local.num_clusters() >= k_in) {
            if depth == 1 {
                return Err(Error::PartitioningFailure {
                    significant,
                    threshold,
                });
            }
            break;
        }
        entity_map = entity_map.compose(&local)?;
        series = cluster_means(&series, &local);
        levels.push(Level {
            partition: entity_map.clone(),
            significant,
            threshold,
            input_series: k_in,
            kmeans_seed: seed,
        });
    }
    Ok(LevelStack {
        levels,
        source_length: t,
    })
}
