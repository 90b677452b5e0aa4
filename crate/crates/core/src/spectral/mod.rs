//! Correlation network, Laplacian spectrum, GE significance test, spectral
//! k-means and the level hierarchy built from them.

mod correlation;
mod kmeans;
mod laplacian;
mod levels;
mod null;
mod partition;

pub use correlation::{chordal_distance, correlation, CorrelationMatrix};
pub use kmeans::{kmeans, spectral_embedding, spectral_kmeans, KMeansConfig, KMeansFit};
pub use laplacian::{
    affinity, count_significant, laplacian, laplacian_matrix, LaplacianSpectrum,
    DEFAULT_ZERO_TOLERANCE,
};
pub use levels::{build_levels, cluster_means, clusters_for, Level, LevelStack};
pub use null::{ge_threshold, ge_threshold_for, GeNullConfig, NullModel, NullPanel};
pub use partition::Partition;

pub(crate) use correlation::correlation_of_rows;
