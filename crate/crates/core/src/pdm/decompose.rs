use nalgebra::DMatrix;

use super::record::{
    DecompositionRecord, IterationRecord, PartitionVector, Termination, TerminationKind,
    RECORD_FORMAT,
};
use crate::error::{Error, Result};
use crate::panel::SeriesPanel;
use crate::scrub::{scrub, ScrubFailure, ScrubFailureKind, ScrubResult};
use crate::spectral::{build_levels, KMeansConfig, LevelStack, NullModel, Partition};
use crate::stats::derive_seed;

/// k-means settings for iteration `alpha`; shared by every caller so that
/// partition vectors with a common prefix produce identical iterations.
pub fn kmeans_for_iteration(base: &KMeansConfig, alpha: usize) -> KMeansConfig {
    KMeansConfig {
        seed: derive_seed(base.seed, alpha as u64),
        ..*base
    }
}

pub(crate) enum LevelOutcome {
    Levels(LevelStack),
    Failure(Termination),
}

/// Hierarchy for iteration `alpha`, mapping a partitioning failure to a termination.
pub(crate) fn levels_at(
    panel: &SeriesPanel,
    alpha: usize,
    null: &NullModel,
    kmeans: &KMeansConfig,
) -> Result<LevelOutcome> {
    if panel.n_entities() < 2 {
        return Ok(LevelOutcome::Failure(Termination {
            kind: TerminationKind::PartitioningFailure,
            iteration: alpha,
            detail: "fewer than two entities".into(),
            significant: Some(0),
            threshold: None,
            condition_estimate: None,
        }));
    }
    match build_levels(panel, null, &kmeans_for_iteration(kmeans, alpha)) {
        Ok(stack) => Ok(LevelOutcome::Levels(stack)),
        Err(Error::PartitioningFailure {
            significant,
            threshold,
        }) => Ok(LevelOutcome::Failure(Termination {
            kind: TerminationKind::PartitioningFailure,
            iteration: alpha,
            detail: format!(
                "{significant} nonzero Laplacian eigenvalue(s) below GE threshold {threshold:.6}"
            ),
            significant: Some(significant),
            threshold: Some(threshold),
            condition_estimate: None,
        })),
        Err(e) => Err(e),
    }
}

pub(crate) fn scrub_failure_termination(f: &ScrubFailure, alpha: usize) -> Termination {
    Termination {
        kind: match f.kind {
            ScrubFailureKind::ProjectionFailure => TerminationKind::ProjectionFailure,
            ScrubFailureKind::DegenerateCluster => TerminationKind::DegenerateCluster,
        },
        iteration: alpha,
        detail: f.detail.clone(),
        significant: None,
        threshold: None,
        condition_estimate: f.condition_estimate,
    }
}

pub(crate) fn iteration_record(
    alpha: usize,
    level: Option<usize>,
    levels: Option<LevelStack>,
    result: ScrubResult,
) -> (IterationRecord, SeriesPanel) {
    let record = IterationRecord {
        alpha,
        level,
        levels,
        characteristic: result.characteristic,
        pressures: result.pressures,
        means: result.residual_means,
        sds: result.residual_sds,
        condition_estimate: result.condition_estimate,
    };
    (record, result.residual_panel)
}

pub(crate) enum StepOutcome {
    Scrubbed(Box<IterationRecord>, SeriesPanel),
    Failed(Termination),
}

pub(crate) fn scrub_step(
    panel: &SeriesPanel,
    partition: &Partition,
    alpha: usize,
    level: Option<usize>,
    levels: Option<LevelStack>,
) -> Result<StepOutcome> {
    match scrub(panel, partition) {
        Ok(result) => {
            let (rec, next) = iteration_record(alpha, level, levels, result);
            Ok(StepOutcome::Scrubbed(Box::new(rec), next))
        }
        Err(Error::Scrub(f)) => Ok(StepOutcome::Failed(scrub_failure_termination(&f, alpha))),
        Err(e) => Err(e),
    }
}

/// Runs the market scrub, then one hierarchical-clustering + scrub iteration
/// per entry of `pv`.
///
/// Partitioning and projection failures end the decomposition early and are
/// recorded in [`DecompositionRecord::termination`]; a level choice beyond the
/// levels available at its iteration is an error.
pub fn decompose(
    panel: &SeriesPanel,
    pv: &PartitionVector,
    null: &NullModel,
    kmeans: &KMeansConfig,
) -> Result<DecompositionRecord> {
    if panel.n_entities() == 0 || panel.n_times() < 2 {
        return Err(Error::InvalidArgument(
            "decomposition needs at least one entity and two observations".into(),
        ));
    }
    if !panel.is_finite() {
        return Err(Error::InvalidArgument(
            "panel contains non-finite values".into(),
        ));
    }
    let mut input = panel.clone();
    input.iteration = 0;

    let mut iterations = Vec::with_capacity(pv.len() + 1);
    let mut current = input;
    let mut termination = None;

    match scrub_step(
        &current,
        &Partition::trivial(current.n_entities()),
        0,
        None,
        None,
    )? {
        StepOutcome::Scrubbed(rec, next) => {
            iterations.push(*rec);
            current = next;
        }
        StepOutcome::Failed(t) => termination = Some(t),
    }

    if termination.is_none() {
        for (idx, level) in pv.iter().enumerate() {
            let alpha = idx + 1;
            let stack = match levels_at(&current, alpha, null, kmeans)? {
                LevelOutcome::Levels(s) => s,
                LevelOutcome::Failure(t) => {
                    termination = Some(t);
                    break;
                }
            };
            let partition = match stack.level(level) {
                Some(l) => l.partition.clone(),
                None => {
                    return Err(Error::LevelOutOfRange {
                        iteration: alpha,
                        level,
                        available: stack.len(),
                    })
                }
            };
            match scrub_step(&current, &partition, alpha, Some(level), Some(stack))? {
                StepOutcome::Scrubbed(rec, next) => {
                    iterations.push(*rec);
                    current = next;
                }
                StepOutcome::Failed(t) => {
                    termination = Some(t);
                    break;
                }
            }
        }
    }

    let termination = termination.unwrap_or(Termination {
        kind: TerminationKind::Completed,
        iteration: iterations.len(),
        detail: format!("completed {} iteration(s)", iterations.len()),
        significant: None,
        threshold: None,
        condition_estimate: None,
    });

    Ok(DecompositionRecord {
        format: RECORD_FORMAT.to_string(),
        partition_vector: pv.clone(),
        entities: panel.entities.clone(),
        times: panel.times.clone(),
        iterations,
        terminal_panel: current,
        termination,
        ge: *null.config(),
        kmeans: *kmeans,
    })
}

fn check_complete(record: &DecompositionRecord) -> Result<()> {
    let n = record.entities.len();
    let t = record.times.len();
    let term = &record.terminal_panel;
    if term.n_entities() != n || term.n_times() != t {
        return Err(Error::IncompleteRecord(format!(
            "terminal panel is {}x{}, expected {n}x{t}",
            term.n_entities(),
            term.n_times()
        )));
    }
    let expected = match record.termination.kind {
        TerminationKind::Completed => record.partition_vector.len() + 1,
        _ => record.termination.iteration,
    };
    if record.iterations.len() != expected {
        return Err(Error::IncompleteRecord(format!(
            "{} iteration(s) stored, {expected} expected for termination {:?} at {}",
            record.iterations.len(),
            record.termination.kind,
            record.termination.iteration
        )));
    }
    for (alpha, it) in record.iterations.iter().enumerate() {
        let k = it.num_clusters();
        let ok = it.alpha == alpha
            && it.characteristic.series.shape() == (k, t)
            && it.pressures.shape() == (n, k)
            && it.means.len() == n
            && it.sds.len() == n
            && it.partition().len() == n;
        if !ok {
            return Err(Error::IncompleteRecord(format!(
                "iteration {alpha} has inconsistent shapes"
            )));
        }
    }
    Ok(())
}

/// Rebuilds a panel from `terminal`, applying
/// `D^a = sum_k tau_k V_k + sd * D^{a+1} + mean` from the last iteration down.
pub(crate) fn invert(record: &DecompositionRecord, terminal: &DMatrix<f64>) -> SeriesPanel {
    let mut x = terminal.clone();
    for it in record.iterations.iter().rev() {
        let mut next = &it.pressures * &it.characteristic.series;
        for i in 0..x.nrows() {
            let (sd, mean) = (it.sds[i], it.means[i]);
            for t in 0..x.ncols() {
                next[(i, t)] += sd * x[(i, t)] + mean;
            }
        }
        x = next;
    }
    SeriesPanel {
        entities: record.entities.clone(),
        times: record.times.clone(),
        values: x,
        iteration: 0,
    }
}

/// The panel the record was decomposed from.
pub fn reconstruct(record: &DecompositionRecord) -> Result<SeriesPanel> {
    check_complete(record)?;
    Ok(invert(record, &record.terminal_panel.values))
}

pub(crate) fn validate(record: &DecompositionRecord) -> Result<()> {
    check_complete(record)
}

#[cfg(test)]
mod tests {
    use rand_distr::{Distribution, StandardNormal};

    use super::*;
    use crate::metrics::max_relative_error;
    use crate::spectral::GeNullConfig;
    use crate::stats::stream_rng;

    fn blocks(sizes: &[usize], t: usize, seed: u64) -> SeriesPanel {
        let mut rng = stream_rng(seed, 0);
        let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
        let f = DMatrix::from_fn(sizes.len() + 1, t, |_, _| draw());
        let labels: Vec<usize> = sizes
            .iter()
            .enumerate()
            .flat_map(|(k, &s)| std::iter::repeat_n(k, s))
            .collect();
        SeriesPanel::from_matrix(DMatrix::from_fn(labels.len(), t, |i, j| {
            f[(0, j)] + 1.5 * f[(labels[i] + 1, j)] + draw()
        }))
    }

    fn null() -> NullModel {
        NullModel::new(GeNullConfig {
            num_sims: 20,
            ..GeNullConfig::default()
        })
    }

    #[test]
    fn empty_vector_is_market_scrub_only() {
        let panel = blocks(&[6, 6], 120, 1);
        let record = decompose(
            &panel,
            &PartitionVector::default(),
            &null(),
            &KMeansConfig::default(),
        )
        .unwrap();
        assert_eq!(record.iterations.len(), 1);
        assert_eq!(record.iterations[0].num_clusters(), 1);
        assert_eq!(record.termination.kind, TerminationKind::Completed);
        let direct = scrub(&panel, &Partition::trivial(12)).unwrap();
        assert_eq!(record.terminal_panel.values, direct.residual_panel.values);
        assert_eq!(record.parameters_per_entity(), 3);
    }

    #[test]
    fn two_blocks_round_trip() {
        let panel = blocks(&[8, 8], 200, 2);
        let record = decompose(
            &panel,
            &PartitionVector(vec![1]),
            &null(),
            &KMeansConfig::default(),
        )
        .unwrap();
        assert_eq!(record.termination.kind, TerminationKind::Completed);
        assert_eq!(record.iterations[1].num_clusters(), 2);
        let back = reconstruct(&record).unwrap();
        assert!(max_relative_error(&back.values, &panel.values) < 1e-12);
    }

    #[test]
    fn level_out_of_range_is_an_error() {
        let panel = blocks(&[8, 8], 200, 2);
        match decompose(
            &panel,
            &PartitionVector(vec![9]),
            &null(),
            &KMeansConfig::default(),
        ) {
            Err(Error::LevelOutOfRange {
                iteration,
                level,
                available,
            }) => {
                assert_eq!((iteration, level), (1, 9));
                assert!(available < 9);
            }
            other => panic!("expected level error, got {other:?}"),
        }
    }

    #[test]
    fn zero_pressures_reconstruct_affinely() {
        let panel = blocks(&[5, 5], 60, 3);
        let mut record = decompose(
            &panel,
            &PartitionVector::default(),
            &null(),
            &KMeansConfig::default(),
        )
        .unwrap();
        record.iterations[0].pressures.fill(0.0);
        let back = reconstruct(&record).unwrap();
        let it = &record.iterations[0];
        for i in 0..10 {
            for t in 0..60 {
                let expected = it.sds[i] * record.terminal_panel.values[(i, t)] + it.means[i];
                assert_eq!(back.values[(i, t)], expected);
            }
        }
    }

    #[test]
    fn single_entity_is_exact() {
        let panel =
            SeriesPanel::from_matrix(DMatrix::from_row_slice(1, 4, &[0.5, -1.0, 2.0, 0.25]));
        let record = decompose(
            &panel,
            &PartitionVector(vec![1]),
            &null(),
            &KMeansConfig::default(),
        )
        .unwrap();
        assert_eq!(record.termination.kind, TerminationKind::DegenerateCluster);
        assert_eq!(reconstruct(&record).unwrap().values, panel.values);
    }

    #[test]
    fn noise_stops_with_partitioning_failure() {
        let mut rng = stream_rng(77, 0);
        let panel = SeriesPanel::from_matrix(DMatrix::from_fn(40, 300, |_, _| {
            StandardNormal.sample(&mut rng)
        }));
        let record = decompose(
            &panel,
            &PartitionVector(vec![1]),
            &null(),
            &KMeansConfig::default(),
        )
        .unwrap();
        assert_eq!(
            record.termination.kind,
            TerminationKind::PartitioningFailure
        );
        assert_eq!(record.termination.iteration, 1);
        assert_eq!(record.iterations.len(), 1);
        let back = reconstruct(&record).unwrap();
        assert!(max_relative_error(&back.values, &panel.values) < 1e-12);
    }

    #[test]
    fn truncated_record_rejected() {
        let panel = blocks(&[8, 8], 200, 2);
        let mut record = decompose(
            &panel,
            &PartitionVector(vec![1]),
            &null(),
            &KMeansConfig::default(),
        )
        .unwrap();
        record.iterations.pop();
        assert!(matches!(
            reconstruct(&record),
            Err(Error::IncompleteRecord(_))
        ));
    }
}
