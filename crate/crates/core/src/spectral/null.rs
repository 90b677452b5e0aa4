use std::collections::HashMap;
use std::sync::Mutex;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::correlation::correlation_of_rows;
use super::laplacian::{laplacian_eigenvalues, DEFAULT_ZERO_TOLERANCE};
use crate::error::{Error, Result};
use crate::stats::stream_rng;

/// Gaussian-ensemble null model settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeNullConfig {
    /// Number of simulated GE(n, m) panels.
    pub num_sims: usize,
    pub seed: u64,
    /// Relative numeric zero for Laplacian eigenvalues.
    pub zero_tolerance: f64,
}

impl Default for GeNullConfig {
    fn default() -> Self {
        GeNullConfig {
            num_sims: 100,
            seed: 0,
            zero_tolerance: DEFAULT_ZERO_TOLERANCE,
        }
    }
}

/// What is done to each simulated GE panel before its spectrum is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NullPanel {
    /// i.i.d. Gaussian rows as drawn.
    Raw,
    /// Rows with their projection on the cross-sectional mean series removed,
    /// matching panels that have been through the market scrub.
    MarketScrubbed,
}

/// Smallest nonzero Laplacian eigenvalue over `num_sims` GE(n, m) simulations.
///
/// Simulation `s` draws from stream `s` of a ChaCha8 generator seeded with
/// `cfg.seed`, so the result does not depend on thread scheduling.
pub fn ge_threshold(n: usize, m: usize, cfg: &GeNullConfig) -> Result<f64> {
    ge_threshold_for(n, m, cfg, NullPanel::Raw)
}

pub fn ge_threshold_for(n: usize, m: usize, cfg: &GeNullConfig, variant: NullPanel) -> Result<f64> {
    if n < 2 || m < 2 {
        return Err(Error::InvalidArgument(format!(
            "GE({n}, {m}) needs n >= 2 and m >= 2"
        )));
    }
    if cfg.num_sims == 0 {
        return Err(Error::InvalidArgument("num_sims must be at least 1".into()));
    }
    let minima: Vec<f64> = (0..cfg.num_sims as u64)
        .into_par_iter()
        .map(|s| simulate_minimum(n, m, cfg.seed, s, cfg.zero_tolerance, variant))
        .collect();
    Ok(minima.into_iter().fold(f64::INFINITY, f64::min))
}

/// Removes from every row its least-squares projection on the column-mean
/// series. Correlations ignore the per-row shift and scale the full market
/// scrub would also apply.
fn remove_market(x: &mut DMatrix<f64>) {
    let m = x.ncols();
    let mut v: Vec<f64> = (0..m).map(|t| x.column(t).mean()).collect();
    let vbar = v.iter().sum::<f64>() / m as f64;
    v.iter_mut().for_each(|a| *a -= vbar);
    let vv: f64 = v.iter().map(|a| a * a).sum();
    if vv == 0.0 {
        return;
    }
    for i in 0..x.nrows() {
        let beta = (0..m).map(|t| x[(i, t)] * v[t]).sum::<f64>() / vv;
        for t in 0..m {
            x[(i, t)] -= beta * v[t];
        }
    }
}

fn simulate_minimum(
    n: usize,
    m: usize,
    seed: u64,
    sim: u64,
    zero_tolerance: f64,
    variant: NullPanel,
) -> f64 {
    let mut rng = stream_rng(seed, sim);
    loop {
        let mut x = DMatrix::<f64>::from_fn(n, m, |_, _| StandardNormal.sample(&mut rng));
        if variant == NullPanel::MarketScrubbed {
            remove_market(&mut x);
        }
        // A constant Gaussian row has probability zero; redraw if it happens.
        let Ok(rho) = correlation_of_rows(&x) else {
            continue;
        };
        let ev = laplacian_eigenvalues(&rho);
        let tol = zero_tolerance * ev.last().copied().unwrap_or(0.0).max(0.0);
        if let Some(min) = ev.into_iter().find(|&l| l > tol) {
            return min;
        }
    }
}

/// GE thresholds memoized by panel shape for one configuration.
#[derive(Debug, Default)]
pub struct NullModel {
    cfg: GeNullConfig,
    cache: Mutex<HashMap<(usize, usize, NullPanel), f64>>,
}

impl NullModel {
    pub fn new(cfg: GeNullConfig) -> Self {
        NullModel {
            cfg,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn config(&self) -> &GeNullConfig {
        &self.cfg
    }

    pub fn threshold(&self, n: usize, m: usize) -> Result<f64> {
        self.threshold_for(n, m, NullPanel::Raw)
    }

    pub fn threshold_for(&self, n: usize, m: usize, variant: NullPanel) -> Result<f64> {
        let key = (n, m, variant);
        if let Some(&t) = self.cache.lock().unwrap().get(&key) {
            return Ok(t);
        }
        let t = ge_threshold_for(n, m, &self.cfg, variant)?;
        self.cache.lock().unwrap().insert(key, t);
        Ok(t)
    }
}
