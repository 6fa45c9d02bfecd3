//! Segmentation and hierarchy evaluation.

mod hungarian;
mod seg;
mod tree;

pub use hungarian::{hungarian, Mapping};
pub use seg::{contingency, evaluate_segmentation, f1_at_50, miou, mof, ContingencyMatrix, SegMetricsReport};
pub use tree::{
    canonical_form, ground_truth_hierarchy, hierarchy_from_labels, tree_stats, unique_tree_count,
    TreeMetricsReport, TreeStats,
};
