//! Reporting on a finished decomposition: sector dominance, centroid
//! embeddings with near-neighbour edges, and rolling sector pressure.

mod dominance;
mod edges;
mod labels;
mod mds;
mod pressure;

pub use dominance::{dominance_report, ClusterComposition, DOMINANCE_FRACTION};
pub use edges::{edge_budget, near_neighbor_edges, Edge};
pub use labels::{EntityLabel, LabelTable, Sector};
pub use mds::{classical_mds, pairwise_distances, MdsEmbedding};
pub use pressure::{
    sector_pressure, subset_tau, window_count, PressureSeries, SectorPressure, DEFAULT_STEP,
    DEFAULT_WINDOW,
};

use nalgebra::DMatrix;

use crate::error::Result;
use crate::scrub::CharacteristicSet;
use crate::spectral::{chordal_distance, correlation_of_rows, CorrelationMatrix, Partition};

/// Chordal distances between the characteristic series of one partition.
pub fn centroid_distances(charset: &CharacteristicSet) -> Result<DMatrix<f64>> {
    let k = charset.len();
    let rho = correlation_of_rows(&charset.series).map_err(|j| {
        crate::error::Error::DegenerateSeries {
            entity: format!("cluster {j}"),
        }
    })?;
    let labels = (0..k).map(|i| i.to_string()).collect();
    Ok(chordal_distance(&CorrelationMatrix { labels, rho }))
}

/// Two-dimensional cluster map with near-neighbour edges.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EmbeddingReport {
    pub embedding: MdsEmbedding,
    pub edges: Vec<Edge>,
    pub sizes: Vec<usize>,
    pub dominant: Vec<Option<Sector>>,
}

pub fn embedding_report(
    charset: &CharacteristicSet,
    labels: &[EntityLabel],
    edge_fraction: f64,
) -> Result<EmbeddingReport> {
    let dist = centroid_distances(charset)?;
    let embedding = classical_mds(&dist, 2)?;
    let edges = if charset.len() >= 2 {
        near_neighbor_edges(&embedding.coords, edge_fraction)?
    } else {
        Vec::new()
    };
    let partition: &Partition = &charset.partition;
    let dominant = dominance_report(partition, labels)
        .into_iter()
        .map(|c| c.dominant)
        .collect();
    Ok(EmbeddingReport {
        embedding,
        edges,
        sizes: partition.sizes(),
        dominant,
    })
}
