use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::labels::{EntityLabel, Sector};
use crate::spectral::Partition;

/// Share of a cluster a sector must strictly exceed to dominate it.
pub const DOMINANCE_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterComposition {
    pub cluster: usize,
    pub size: usize,
    /// Fraction of members per sector; all nine sectors present, summing to 1.
    pub sector_fractions: BTreeMap<Sector, f64>,
    pub exchange_fractions: BTreeMap<String, f64>,
    /// `None` means unclassified.
    pub dominant: Option<Sector>,
}

impl ClusterComposition {
    pub fn nasdaq_fraction(&self) -> f64 {
        self.exchange_fractions
            .get("NASDAQ")
            .copied()
            .unwrap_or(0.0)
    }
}

/// Sector/exchange histogram of every cluster and its dominant sector, if any.
pub fn dominance_report(partition: &Partition, labels: &[EntityLabel]) -> Vec<ClusterComposition> {
    assert_eq!(partition.len(), labels.len(), "one label per entity");
    partition
        .members()
        .into_iter()
        .enumerate()
        .map(|(cluster, members)| {
            let size = members.len();
            let mut sectors: BTreeMap<Sector, usize> =
                Sector::ALL.iter().map(|&s| (s, 0)).collect();
            let mut exchanges: BTreeMap<String, usize> = BTreeMap::new();
            for &i in &members {
                *sectors.get_mut(&labels[i].sector).unwrap() += 1;
                *exchanges.entry(labels[i].exchange.clone()).or_default() += 1;
            }
            let frac = |c: usize| c as f64 / size as f64;
            let dominant = sectors
                .iter()
                .find(|(_, &c)| frac(c) > DOMINANCE_FRACTION)
                .map(|(&s, _)| s);
            ClusterComposition {
                cluster,
                size,
                sector_fractions: sectors.into_iter().map(|(s, c)| (s, frac(c))).collect(),
                exchange_fractions: exchanges.into_iter().map(|(e, c)| (e, frac(c))).collect(),
                dominant,
            }
        })
        .collect()
}
