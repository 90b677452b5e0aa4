use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::SeriesPanel;
use crate::scrub::CharacteristicSet;
use crate::spectral::{GeNullConfig, KMeansConfig, LevelStack, Partition};
use crate::stats::serde_rows;

pub const RECORD_FORMAT: &str = "pdm-record/1";

/// Level chosen at each iteration after the market scrub, 1-based.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PartitionVector(pub Vec<usize>);

impl PartitionVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn child(&self, level: usize) -> PartitionVector {
        let mut v = self.0.clone();
        v.push(level);
        PartitionVector(v)
    }
}

impl fmt::Display for PartitionVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(usize::to_string).collect();
        write!(f, "<{}>", parts.join(","))
    }
}

impl FromStr for PartitionVector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s
            .trim()
            .trim_start_matches('<')
            .trim_end_matches('>')
            .trim();
        if s.is_empty() {
            return Ok(PartitionVector::default());
        }
        s.split(',')
            .map(|p| match p.trim().parse::<usize>() {
                Ok(0) | Err(_) => Err(Error::InvalidArgument(format!(
                    "partition vector entries are positive integers, got `{p}`"
                ))),
                Ok(l) => Ok(l),
            })
            .collect::<Result<Vec<_>>>()
            .map(PartitionVector)
    }
}

/// Everything one scrubbing iteration stores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub alpha: usize,
    /// Level selected from `levels` (absent for the market scrub).
    pub level: Option<usize>,
    pub levels: Option<LevelStack>,
    pub characteristic: CharacteristicSet,
    /// `N x |C|` cluster pressures.
    #[serde(with = "serde_rows")]
    pub pressures: nalgebra::DMatrix<f64>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub condition_estimate: f64,
}

impl IterationRecord {
    pub fn partition(&self) -> &Partition {
        &self.characteristic.partition
    }

    pub fn num_clusters(&self) -> usize {
        self.characteristic.partition.num_clusters()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminationKind {
    Completed,
    PartitioningFailure,
    ProjectionFailure,
    /// Some entity's residual vanished (fully explained by the clusters).
    DegenerateCluster,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Termination {
    pub kind: TerminationKind,
    /// Iteration at which the decomposition stopped (`m + 1` when completed).
    pub iteration: usize,
    pub detail: String,
    pub significant: Option<usize>,
    pub threshold: Option<f64>,
    pub condition_estimate: Option<f64>,
}

/// Output of a decomposition: enough to rebuild the input panel exactly and to
/// synthesize null-model panels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionRecord {
    pub format: String,
    pub partition_vector: PartitionVector,
    pub entities: Vec<String>,
    pub times: Vec<String>,
    pub iterations: Vec<IterationRecord>,
    pub terminal_panel: SeriesPanel,
    pub termination: Termination,
    pub ge: GeNullConfig,
    pub kmeans: KMeansConfig,
}

impl DecompositionRecord {
    /// Stored scalars per entity: `sum_alpha |C^alpha| + 2 (m + 1)`.
    pub fn parameters_per_entity(&self) -> usize {
        self.iterations.iter().map(|it| it.num_clusters() + 2).sum()
    }

    pub fn partitions(&self) -> impl Iterator<Item = &Partition> {
        self.iterations.iter().map(IterationRecord::partition)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let record: DecompositionRecord = serde_json::from_str(text)?;
        if record.format != RECORD_FORMAT {
            return Err(Error::Format(format!(
                "unsupported record format `{}` (expected `{RECORD_FORMAT}`)",
                record.format
            )));
        }
        Ok(record)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_vector_parsing() {
        assert_eq!("1,2".parse::<PartitionVector>().unwrap().0, vec![1, 2]);
        assert_eq!("<2>".parse::<PartitionVector>().unwrap().0, vec![2]);
        assert!("".parse::<PartitionVector>().unwrap().is_empty());
        assert!("0,1".parse::<PartitionVector>().is_err());
        assert!("a".parse::<PartitionVector>().is_err());
        assert_eq!(PartitionVector(vec![1, 1]).to_string(), "<1,1>");
    }
}
