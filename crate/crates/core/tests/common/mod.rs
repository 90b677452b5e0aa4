#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use pdm_core::panel::SeriesPanel;
use pdm_core::pdm::{
    generate_pdnm, DecompositionRecord, IterationRecord, PartitionVector, PdnmSpec, Termination,
    TerminationKind, RECORD_FORMAT,
};
use pdm_core::scrub::CharacteristicSet;
use pdm_core::spectral::{GeNullConfig, KMeansConfig, NullModel, Partition};
use pdm_core::stats::stream_rng;

pub fn gaussian(n: usize, t: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = stream_rng(seed, 0);
    DMatrix::from_fn(n, t, |_, _| StandardNormal.sample(&mut rng))
}

pub fn gaussian_panel(n: usize, t: usize, seed: u64) -> SeriesPanel {
    SeriesPanel::from_matrix(gaussian(n, t, seed))
}

/// Panel with one market factor and `sizes.len()` block factors:
/// `x_i = market * m + load * f_{block(i)} + noise`.
pub fn block_panel(
    sizes: &[usize],
    t: usize,
    market: f64,
    load: f64,
    seed: u64,
) -> (SeriesPanel, Partition) {
    let n: usize = sizes.iter().sum();
    let labels: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(k, &s)| std::iter::repeat_n(k, s))
        .collect();
    let f = gaussian(sizes.len() + 1, t, seed.wrapping_add(1_000_003));
    let noise = gaussian(n, t, seed);
    let values = DMatrix::from_fn(n, t, |i, j| {
        market * f[(0, j)] + load * f[(labels[i] + 1, j)] + noise[(i, j)]
    });
    (
        SeriesPanel::from_matrix(values),
        Partition::new(labels).unwrap(),
    )
}

/// Uniform random panel with a random number of shared factors, for
/// property-style sweeps.
pub fn random_panel(n: usize, t: usize, seed: u64) -> SeriesPanel {
    let mut rng = stream_rng(seed, 7);
    let k = rng.random_range(1..=4);
    let f = gaussian(k, t, seed.wrapping_mul(31).wrapping_add(5));
    let noise = gaussian(n, t, seed.wrapping_mul(17).wrapping_add(3));
    let loads = DMatrix::from_fn(n, k, |_, _| rng.random_range(-1.5..1.5));
    SeriesPanel::from_matrix(loads * f + noise)
}

pub fn fast_null() -> NullModel {
    NullModel::new(GeNullConfig {
        num_sims: 20,
        ..GeNullConfig::default()
    })
}

pub fn fast_kmeans(seed: u64) -> KMeansConfig {
    KMeansConfig {
        seed,
        restarts: 8,
        max_iter: 100,
    }
}

/// Two interleaved planted partitions: `k1` clusters of `k2 * per_cell`
/// entities, each containing `per_cell` members of every one of `k2`
/// second-level clusters.
#[derive(Debug, Clone, Copy)]
pub struct PlantedDesign {
    pub k1: usize,
    pub k2: usize,
    pub per_cell: usize,
    pub t: usize,
    /// Pressure on the first-level characteristic series.
    pub a: f64,
    /// Pressure on the second-level characteristic series.
    pub b: f64,
}

impl PlantedDesign {
    pub const ACCEPTANCE: PlantedDesign = PlantedDesign {
        k1: 6,
        k2: 3,
        per_cell: 5,
        t: 600,
        a: 8.0,
        b: 1.5,
    };

    pub fn n(&self) -> usize {
        self.k1 * self.k2 * self.per_cell
    }

    pub fn first(&self) -> Partition {
        let size = self.k2 * self.per_cell;
        Partition::new((0..self.n()).map(|i| i / size).collect()).unwrap()
    }

    pub fn second(&self) -> Partition {
        let size = self.k2 * self.per_cell;
        Partition::new((0..self.n()).map(|i| (i % size) / self.per_cell).collect()).unwrap()
    }

    /// Correlation between two members of one second-level cluster of `D^2`.
    pub fn second_level_correlation(&self) -> f64 {
        self.b * self.b / (self.b * self.b + 1.0)
    }

    /// Correlation between two members of one first-level cluster of `D^1`
    /// that sit in different second-level clusters.
    pub fn first_level_correlation(&self) -> f64 {
        self.a * self.a / (self.a * self.a + self.b * self.b + 1.0)
    }

    /// Hand-built record: market scrub, then the first and second planted
    /// partitions, each with unit pressure scale and independent Gaussian
    /// characteristic series drawn from `seed`.
    pub fn record(&self, seed: u64) -> DecompositionRecord {
        let n = self.n();
        let t = self.t;
        let parts = [Partition::trivial(n), self.first(), self.second()];
        let loads = [1.0, self.a, self.b];
        let iterations = parts
            .iter()
            .zip(loads)
            .enumerate()
            .map(|(alpha, (p, load))| {
                let k = p.num_clusters();
                let series = gaussian(k, t, seed.wrapping_mul(101).wrapping_add(alpha as u64 + 11));
                let pressures =
                    DMatrix::from_fn(n, k, |i, c| if p.label(i) == c { load } else { 0.0 });
                IterationRecord {
                    alpha,
                    level: (alpha > 0).then_some(1),
                    levels: None,
                    characteristic: CharacteristicSet {
                        series,
                        partition: p.clone(),
                    },
                    pressures,
                    means: vec![0.0; n],
                    sds: vec![1.0; n],
                    condition_estimate: 1.0,
                }
            })
            .collect();
        let entities: Vec<String> = (0..n).map(|i| format!("E{i}")).collect();
        let times: Vec<String> = (0..t).map(|j| j.to_string()).collect();
        DecompositionRecord {
            format: RECORD_FORMAT.into(),
            partition_vector: PartitionVector(vec![1, 1]),
            entities: entities.clone(),
            times: times.clone(),
            iterations,
            terminal_panel: SeriesPanel::new(entities, times, DMatrix::zeros(n, t)).unwrap(),
            termination: Termination {
                kind: TerminationKind::Completed,
                iteration: 3,
                detail: String::new(),
                significant: None,
                threshold: None,
                condition_estimate: None,
            },
            ge: GeNullConfig::default(),
            kmeans: KMeansConfig::default(),
        }
    }

    pub fn panel(&self, seed: u64) -> SeriesPanel {
        generate_pdnm(&PdnmSpec {
            record: self.record(seed),
            noise_seed: seed,
        })
        .unwrap()
    }
}

/// Pearson cross-correlation of `x[t]` with `y[t + lag]` over the overlap.
pub fn cross_correlation(x: &[f64], y: &[f64], lag: isize) -> f64 {
    let n = x.len() as isize;
    let (xs, ys): (Vec<f64>, Vec<f64>) = (0..n)
        .filter_map(|t| {
            let u = t + lag;
            (0..n).contains(&u).then(|| (x[t as usize], y[u as usize]))
        })
        .unzip();
    pdm_core::stats::pearson(&xs, &ys).unwrap_or(0.0)
}

/// Lag in `[-max_lag, max_lag]` maximizing the cross-correlation; ties go to
/// the smallest magnitude.
pub fn argmax_lag(x: &[f64], y: &[f64], max_lag: isize) -> isize {
    let mut best = (f64::NEG_INFINITY, 0isize);
    for mag in 0..=max_lag {
        for lag in if mag == 0 { vec![0] } else { vec![-mag, mag] } {
            let c = cross_correlation(x, y, lag);
            if c > best.0 {
                best = (c, lag);
            }
        }
    }
    best.1
}

/// Eight sectors whose market loading rotates: entity `i` in sector `s` has
/// returns `(1 + amplitude * sin(2 pi t / T + 2 pi s / 8)) * M_t + noise`.
/// Phases are evenly spread, so the cross-sectional mean loading stays 1.
pub fn rotation_panel(
    t: usize,
    per_sector: usize,
    amplitude: f64,
    noise: f64,
    seed: u64,
) -> (SeriesPanel, Vec<pdm_core::analysis::EntityLabel>) {
    use pdm_core::analysis::{EntityLabel, Sector};
    let n = 8 * per_sector;
    let market = gaussian(1, t, seed.wrapping_add(99));
    let eps = gaussian(n, t, seed);
    let values = DMatrix::from_fn(n, t, |i, j| {
        let s = (i / per_sector) as f64;
        let phase = std::f64::consts::TAU * (j as f64 / t as f64 + s / 8.0);
        (1.0 + amplitude * phase.sin()) * market[(0, j)] + noise * eps[(i, j)]
    });
    let labels = (0..n)
        .map(|i| EntityLabel {
            sector: Sector::ALL[i / per_sector],
            exchange: "NYSE".into(),
        })
        .collect();
    (SeriesPanel::from_matrix(values), labels)
}
