//! Iterated partition scrubbing driven by a partition vector, exact
//! reconstruction, and null-model synthesis.

mod decompose;
mod pdnm;
mod record;
mod tree;

pub use decompose::{decompose, kmeans_for_iteration, reconstruct};
pub use pdnm::{generate_pdnm, PdnmSpec};
pub use record::{
    DecompositionRecord, IterationRecord, PartitionVector, Termination, TerminationKind,
    RECORD_FORMAT,
};
pub use tree::{partition_tree, TreeNode};
