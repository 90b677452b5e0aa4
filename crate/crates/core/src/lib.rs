//! Partition decoupling of correlation networks.
//!
//! A panel of time series is repeatedly clustered and "scrubbed": spectral
//! clustering of the correlation network, gated by a Gaussian-ensemble null
//! model, yields a partition; each series is projected onto the cluster-mean
//! (characteristic) series and the normalized residual is passed to the next
//! iteration. The stored pressures, means and standard deviations rebuild the
//! input exactly, and replacing the final residual with Gaussian noise yields
//! synthetic panels that keep the discovered cluster structure.
//!
//! Modules follow the pipeline:
//! [`panel`] (ingestion and cleaning) → [`spectral`] (clustering) →
//! [`scrub`] (one projection step) → [`pdm`] (iteration, reconstruction,
//! null-model synthesis) → [`analysis`] (reports).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod metrics;
pub mod panel;
pub mod pdm;
pub mod scrub;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
