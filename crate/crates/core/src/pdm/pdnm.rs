use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use super::decompose::{invert, validate};
use super::record::{DecompositionRecord, TerminationKind};
use crate::error::{Error, Result};
use crate::panel::{normalize_rows, SeriesPanel};
use crate::stats::stream_rng;

/// A decomposition plus the seed for the Gaussian panel that replaces its
/// terminal residuals.
#[derive(Debug, Clone)]
pub struct PdnmSpec {
    pub record: DecompositionRecord,
    pub noise_seed: u64,
}

/// Synthesizes a partition-decoupled null-model panel: the terminal residual
/// panel is replaced by row-normalized i.i.d. standard Gaussian series and the
/// stored scrubbing chain is inverted.
pub fn generate_pdnm(spec: &PdnmSpec) -> Result<SeriesPanel> {
    let record = &spec.record;
    if record.termination.kind == TerminationKind::ProjectionFailure {
        return Err(Error::Uninvertible(format!(
            "decomposition stopped with a projection failure at iteration {}: {}",
            record.termination.iteration, record.termination.detail
        )));
    }
    validate(record)?;
    let n = record.entities.len();
    let t = record.times.len();
    if t < 2 {
        return Err(Error::InvalidArgument(
            "need at least two observations".into(),
        ));
    }
    let mut rng = stream_rng(spec.noise_seed, 0);
    let noise = DMatrix::<f64>::from_fn(n, t, |_, _| StandardNormal.sample(&mut rng));
    let noise = SeriesPanel {
        entities: record.entities.clone(),
        times: record.times.clone(),
        values: noise,
        iteration: record.iterations.len(),
    };
    let (normalized, _, _) = normalize_rows(&noise)?;
    Ok(invert(record, &normalized.values))
}
