//! Critical stable Galton–Watson trees.
//!
//! The offspring generating function f(s) = s + α^{-1}(1-s)^α is critical
//! and lies in the α-stable domain of attraction, so the rescaled height
//! process of these trees converges to the height process of the stable
//! tree. One unconditioned tree plays the role of one excursion; trees
//! conditioned on their total progeny approximate the normalized laws.

mod analyze;
mod dump;
mod offspring;
mod sampler;

pub use analyze::{analyze, TreeStats};
pub use dump::{read_tree, write_tree};
pub use offspring::OffspringLaw;
pub use sampler::{
    sample_progeny, sample_tree, sample_tree_conditioned, ConditionedTree, PlaneTree, TreeSample,
    ROOT_SENTINEL,
};
