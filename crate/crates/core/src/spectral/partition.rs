use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Surjective map from entity index to a cluster label in `0..k`.
///
/// Labels are canonical when produced by this crate: clusters are numbered in
/// ascending order of their smallest member index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    assignment: Vec<usize>,
    k: usize,
}

impl Partition {
    /// Validates surjectivity onto `0..k` with `k = max label + 1`.
    pub fn new(assignment: Vec<usize>) -> Result<Self> {
        let k = assignment.iter().max().map_or(0, |m| m + 1);
        let mut used = vec![false; k];
        for &a in &assignment {
            used[a] = true;
        }
        if let Some(missing) = used.iter().position(|u| !u) {
            return Err(Error::InvalidArgument(format!(
                "partition is not surjective: label {missing} unused"
            )));
        }
        Ok(Partition { assignment, k })
    }

    /// Relabels arbitrary labels into canonical form, dropping unused labels.
    pub fn canonical(labels: &[usize]) -> Self {
        let mut map = std::collections::HashMap::new();
        let assignment = labels
            .iter()
            .map(|l| {
                let next = map.len();
                *map.entry(*l).or_insert(next)
            })
            .collect();
        Partition {
            assignment,
            k: map.len(),
        }
    }

    /// Everything in one cluster.
    pub fn trivial(n: usize) -> Self {
        Partition {
            assignment: vec![0; n],
            k: usize::from(n > 0),
        }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn label(&self, i: usize) -> usize {
        self.assignment[i]
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn num_clusters(&self) -> usize {
        self.k
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignment {
            sizes[a] += 1;
        }
        sizes
    }

    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &a) in self.assignment.iter().enumerate() {
            out[a].push(i);
        }
        out
    }

    /// Partition of the same entities where entity `i` gets `coarse.label(self.label(i))`.
    pub fn compose(&self, coarse: &Partition) -> Result<Partition> {
        if coarse.len() != self.k {
            return Err(Error::InvalidArgument(format!(
                "coarse partition covers {} clusters, fine partition has {}",
                coarse.len(),
                self.k
            )));
        }
        let labels: Vec<usize> = self.assignment.iter().map(|&a| coarse.label(a)).collect();
        Ok(Partition::canonical(&labels))
    }

    /// True when each cluster of `finer` lies inside a single cluster of `self`.
    pub fn is_coarsening_of(&self, finer: &Partition) -> bool {
        if finer.len() != self.len() {
            return false;
        }
        let mut image = vec![None; finer.k];
        for (i, &f) in finer.assignment.iter().enumerate() {
            match image[f] {
                None => image[f] = Some(self.assignment[i]),
                Some(c) if c != self.assignment[i] => return false,
                _ => {}
            }
        }
        true
    }

    /// Entity order permuted: output entity `i` is input entity `order[i]`, labels canonicalized.
    pub fn permuted(&self, order: &[usize]) -> Partition {
        let labels: Vec<usize> = order.iter().map(|&i| self.assignment[i]).collect();
        Partition::canonical(&labels)
    }
}
