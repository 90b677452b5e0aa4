use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use pdm_core::analysis::{DEFAULT_STEP, DEFAULT_WINDOW};
use pdm_core::pdm::PartitionVector;
use pdm_core::spectral::{GeNullConfig, KMeansConfig, DEFAULT_ZERO_TOLERANCE};

pub const TOOL_VERSION: &str = concat!("pdm ", env!("CARGO_PKG_VERSION"));

/// Parameters shared by every subcommand. Unset flags fall back to the
/// config file, then to the built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Params {
    /// TOML file with default parameters (flags override it)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for parallel sections
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Partition vector, e.g. `1,1` or `<2,1>`
    #[arg(long, global = true)]
    pub pv: Option<String>,
    /// Number of GE(n, m) simulations for the null threshold
    #[arg(long, global = true)]
    pub ge_sims: Option<usize>,
    /// Seed of the GE null simulations
    #[arg(long, global = true)]
    pub ge_seed: Option<u64>,
    /// Base seed of the k-means restarts
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Seed of the Gaussian panel used by `pdnm`
    #[arg(long, global = true)]
    pub noise_seed: Option<u64>,
    /// Relative tolerance below which a Laplacian eigenvalue counts as zero
    #[arg(long, global = true)]
    pub zero_tolerance: Option<f64>,
    /// Entities missing more than this fraction of dates are dropped
    #[arg(long, global = true)]
    pub max_missing: Option<f64>,
    /// Returns with at least this magnitude are zeroed
    #[arg(long, global = true)]
    pub extreme: Option<f64>,
    #[arg(long, global = true)]
    pub restarts: Option<usize>,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    /// Rolling window length for sector pressure
    #[arg(long, global = true)]
    pub window: Option<usize>,
    /// Rolling window step for sector pressure
    #[arg(long, global = true)]
    pub step: Option<usize>,
    /// Fraction of centroid pairs drawn as edges
    #[arg(long, global = true)]
    pub edge_fraction: Option<f64>,
    /// Depth of the partition-vector tree
    #[arg(long, global = true)]
    pub depth: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    threads: Option<usize>,
    pv: Option<String>,
    ge_sims: Option<usize>,
    ge_seed: Option<u64>,
    seed: Option<u64>,
    noise_seed: Option<u64>,
    zero_tolerance: Option<f64>,
    max_missing: Option<f64>,
    extreme: Option<f64>,
    restarts: Option<usize>,
    max_iter: Option<usize>,
    window: Option<usize>,
    step: Option<usize>,
    edge_fraction: Option<f64>,
    depth: Option<usize>,
}

/// Fully resolved settings. Its JSON form (together with the input digests)
/// is what the config hash covers; output locations are left out.
#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub command: String,
    pub inputs: BTreeMap<String, String>,
    #[serde(skip)]
    pub threads: Option<usize>,
    pub pv: Option<String>,
    pub ge_sims: usize,
    pub ge_seed: u64,
    pub seed: u64,
    pub noise_seed: u64,
    pub zero_tolerance: f64,
    pub max_missing: f64,
    pub extreme: f64,
    pub restarts: usize,
    pub max_iter: usize,
    pub window: usize,
    pub step: usize,
    pub edge_fraction: f64,
    pub depth: usize,
}

impl Settings {
    pub fn resolve(command: &str, p: &Params) -> Result<Settings> {
        let f = match &p.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                toml::from_str::<FileConfig>(&text)
                    .with_context(|| format!("parsing config {}", path.display()))?
            }
            None => FileConfig::default(),
        };
        let s = Settings {
            command: command.to_string(),
            inputs: BTreeMap::new(),
            threads: p.threads.or(f.threads),
            pv: p.pv.clone().or(f.pv),
            ge_sims: p.ge_sims.or(f.ge_sims).unwrap_or(100),
            ge_seed: p.ge_seed.or(f.ge_seed).unwrap_or(0),
            seed: p.seed.or(f.seed).unwrap_or(0),
            noise_seed: p.noise_seed.or(f.noise_seed).unwrap_or(0),
            zero_tolerance: p
                .zero_tolerance
                .or(f.zero_tolerance)
                .unwrap_or(DEFAULT_ZERO_TOLERANCE),
            max_missing: p.max_missing.or(f.max_missing).unwrap_or(0.30),
            extreme: p.extreme.or(f.extreme).unwrap_or(0.20),
            restarts: p.restarts.or(f.restarts).unwrap_or(20),
            max_iter: p.max_iter.or(f.max_iter).unwrap_or(300),
            window: p.window.or(f.window).unwrap_or(DEFAULT_WINDOW),
            step: p.step.or(f.step).unwrap_or(DEFAULT_STEP),
            edge_fraction: p.edge_fraction.or(f.edge_fraction).unwrap_or(0.10),
            depth: p.depth.or(f.depth).unwrap_or(2),
        };
        if s.threads == Some(0) {
            bail!("--threads must be at least 1");
        }
        if s.ge_sims == 0 || s.restarts == 0 || s.max_iter == 0 {
            bail!("--ge-sims, --restarts and --max-iter must be positive");
        }
        Ok(s)
    }

    /// Records the content digest of an input file under `name`.
    pub fn add_input(&mut self, name: &str, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs
            .insert(name.to_string(), hex(&Sha256::digest(&bytes)));
        Ok(())
    }

    pub fn partition_vector(&self) -> Result<PartitionVector> {
        let Some(text) = &self.pv else {
            bail!("no partition vector given (use --pv or `pv` in the config file)");
        };
        text.parse()
            .map_err(|e| anyhow::anyhow!("invalid partition vector `{text}`: {e}"))
    }

    pub fn ge(&self) -> GeNullConfig {
        GeNullConfig {
            num_sims: self.ge_sims,
            seed: self.ge_seed,
            zero_tolerance: self.zero_tolerance,
        }
    }

    pub fn kmeans(&self) -> KMeansConfig {
        KMeansConfig {
            seed: self.seed,
            restarts: self.restarts,
            max_iter: self.max_iter,
        }
    }

    pub fn config_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("settings serialize");
        hex(&Sha256::digest(&json))
    }

    pub fn seeds_line(&self) -> String {
        format!(
            "seeds: ge={} kmeans={} noise={}",
            self.ge_seed, self.seed, self.noise_seed
        )
    }

    /// Header lines for text outputs (written with a `# ` prefix).
    pub fn header(&self) -> Vec<String> {
        vec![
            format!("tool: {TOOL_VERSION}"),
            format!("command: {}", self.command),
            format!("config_sha256: {}", self.config_hash()),
            self.seeds_line(),
        ]
    }

    /// Provenance block embedded in JSON outputs.
    pub fn provenance(&self) -> serde_json::Value {
        serde_json::json!({
            "tool": TOOL_VERSION,
            "command": self.command,
            "config_sha256": self.config_hash(),
            "seeds": { "ge": self.ge_seed, "kmeans": self.seed, "noise": self.noise_seed },
            "settings": self,
        })
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "seed = 5\nge_sims = 10\npv = \"2\"\n").unwrap();
        let p = Params {
            config: Some(path),
            seed: Some(9),
            ..Params::default()
        };
        let s = Settings::resolve("decompose", &p).unwrap();
        assert_eq!(s.seed, 9);
        assert_eq!(s.ge_sims, 10);
        assert_eq!(s.partition_vector().unwrap(), PartitionVector(vec![2]));
        assert_eq!(s.max_missing, 0.30);
        assert_eq!(s.extreme, 0.20);
    }

    #[test]
    fn unknown_config_key_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "sedd = 5\n").unwrap();
        let p = Params {
            config: Some(path),
            ..Params::default()
        };
        assert!(Settings::resolve("decompose", &p).is_err());
    }

    #[test]
    fn hash_ignores_threads() {
        let a = Settings::resolve("tree", &Params::default()).unwrap();
        let b = Settings::resolve(
            "tree",
            &Params {
                threads: Some(3),
                ..Params::default()
            },
        )
        .unwrap();
        assert_eq!(a.config_hash(), b.config_hash());
        let c = Settings::resolve(
            "tree",
            &Params {
                seed: Some(1),
                ..Params::default()
            },
        )
        .unwrap();
        assert_ne!(a.config_hash(), c.config_hash());
    }
}
