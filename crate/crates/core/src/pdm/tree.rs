use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::decompose::{levels_at, scrub_step, LevelOutcome, StepOutcome};
use super::record::{PartitionVector, Termination};
use crate::error::{Error, Result};
use crate::panel::SeriesPanel;
use crate::spectral::{KMeansConfig, NullModel, Partition};

/// One partition vector in the enumeration and what its last iteration produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub partition_vector: PartitionVector,
    /// `|C^alpha|` of this node's iteration; `None` when its scrub failed.
    pub clusters: Option<usize>,
    /// Levels found on this node's residual panel (the children's choices).
    pub available_levels: usize,
    /// Why the branch stops here, when it does so before `max_depth`.
    pub termination: Option<Termination>,
    pub children: Vec<TreeNode>,
}

impl TreeNode {
    pub fn leaves(&self) -> Vec<&TreeNode> {
        if self.children.is_empty() {
            vec![self]
        } else {
            self.children.iter().flat_map(TreeNode::leaves).collect()
        }
    }

    pub fn find(&self, pv: &PartitionVector) -> Option<&TreeNode> {
        if &self.partition_vector == pv {
            return Some(self);
        }
        self.children.iter().find_map(|c| c.find(pv))
    }
}

fn expand(
    node: &mut TreeNode,
    residual: &SeriesPanel,
    depth: usize,
    max_depth: usize,
    null: &NullModel,
    kmeans: &KMeansConfig,
) -> Result<()> {
    if depth > max_depth {
        return Ok(());
    }
    let alpha = depth;
    let stack = match levels_at(residual, alpha, null, kmeans)? {
        LevelOutcome::Levels(s) => s,
        LevelOutcome::Failure(t) => {
            node.termination = Some(t);
            return Ok(());
        }
    };
    node.available_levels = stack.len();
    let children: Vec<Result<TreeNode>> = stack
        .levels
        .par_iter()
        .enumerate()
        .map(|(idx, level)| {
            let pv = node.partition_vector.child(idx + 1);
            let mut child = TreeNode {
                partition_vector: pv,
                clusters: None,
                available_levels: 0,
                termination: None,
                children: Vec::new(),
            };
            match scrub_step(residual, &level.partition, alpha, Some(idx + 1), None)? {
                StepOutcome::Scrubbed(rec, next) => {
                    child.clusters = Some(rec.num_clusters());
                    expand(&mut child, &next, depth + 1, max_depth, null, kmeans)?;
                }
                StepOutcome::Failed(t) => child.termination = Some(t),
            }
            Ok(child)
        })
        .collect();
    node.children = children.into_iter().collect::<Result<_>>()?;
    Ok(())
}

/// Enumerates every partition vector up to `max_depth` choices.
///
/// The root is the market scrub (`<>`). Branches share their prefix work, and
/// each iteration uses the same seeds as [`super::decompose`], so a node's
/// cluster count equals what `decompose` reports for that vector.
pub fn partition_tree(
    panel: &SeriesPanel,
    max_depth: usize,
    null: &NullModel,
    kmeans: &KMeansConfig,
) -> Result<TreeNode> {
    if max_depth < 1 {
        return Err(Error::InvalidArgument(
            "max_depth must be at least 1".into(),
        ));
    }
    let mut root = TreeNode {
        partition_vector: PartitionVector::default(),
        clusters: None,
        available_levels: 0,
        termination: None,
        children: Vec::new(),
    };
    let mut input = panel.clone();
    input.iteration = 0;
    match scrub_step(
        &input,
        &Partition::trivial(input.n_entities()),
        0,
        None,
        None,
    )? {
        StepOutcome::Scrubbed(rec, next) => {
            root.clusters = Some(rec.num_clusters());
            expand(&mut root, &next, 1, max_depth, null, kmeans)?;
        }
        StepOutcome::Failed(t) => root.termination = Some(t),
    }
    Ok(root)
}
