//! Hierarchy metrics over per-episode derivation trees.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grammar::{build_corpus, induce, parse_trees, Grammar};
use crate::model::{skill_sequence, EpisodeTree, FrameLabeling, TreeNode};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeStats {
    /// Nodes on the longest root-to-leaf path.
    pub depth: usize,
    /// All nodes, synthetic root and leaves included.
    pub size: usize,
    pub mean_branch: f64,
    pub max_branch: usize,
}

pub fn tree_stats(tree: &EpisodeTree) -> TreeStats {
    let mut depth = 0;
    let mut size = 0;
    let mut internal = 0usize;
    let mut children_total = 0usize;
    let mut max_branch = 0;
    let mut stack = vec![(&tree.root, 1usize)];
    while let Some((node, d)) = stack.pop() {
        size += 1;
        depth = depth.max(d);
        if let TreeNode::Internal { children, .. } = node {
            if !children.is_empty() {
                internal += 1;
                children_total += children.len();
                max_branch = max_branch.max(children.len());
            }
            stack.extend(children.iter().map(|c| (c, d + 1)));
        }
    }
    TreeStats {
        depth,
        size,
        mean_branch: if internal == 0 {
            0.0
        } else {
            children_total as f64 / internal as f64
        },
        max_branch,
    }
}

/// Preorder serialization recording arity and leaf ids, ignoring rule numbering.
fn canonical(node: &TreeNode, out: &mut String) {
    match node {
        TreeNode::Leaf(t) => {
            let _ = write!(out, "t{t}");
        }
        TreeNode::Internal { children, .. } => {
            let _ = write!(out, "({}", children.len());
            for c in children {
                out.push(' ');
                canonical(c, out);
            }
            out.push(')');
        }
    }
}

pub fn canonical_form(tree: &EpisodeTree) -> String {
    let mut s = String::new();
    canonical(&tree.root, &mut s);
    s
}

/// Number of structurally distinct trees.
pub fn unique_tree_count(trees: &[EpisodeTree]) -> usize {
    trees.iter().map(canonical_form).collect::<HashSet<_>>().len()
}

/// Hierarchy scores, averaged over episodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeMetricsReport {
    pub unique_trees: usize,
    pub avg_depth: f64,
    pub avg_size: f64,
    pub avg_branching: f64,
    /// Mean over trees of each tree's largest branching factor.
    pub max_branching: f64,
}

impl TreeMetricsReport {
    pub fn from_trees(trees: &[EpisodeTree]) -> Self {
        let n = trees.len().max(1) as f64;
        let stats: Vec<TreeStats> = trees.iter().map(tree_stats).collect();
        let mean = |f: &dyn Fn(&TreeStats) -> f64| stats.iter().map(f).sum::<f64>() / n;
        Self {
            unique_trees: unique_tree_count(trees),
            avg_depth: mean(&|s| s.depth as f64),
            avg_size: mean(&|s| s.size as f64),
            avg_branching: mean(&|s| s.mean_branch),
            max_branching: mean(&|s| s.max_branch as f64),
        }
    }

    pub fn to_text(&self) -> String {
        format!(
            "unique_trees = {}\navg_depth = {:.6}\navg_size = {:.6}\navg_branching = {:.6}\nmax_branching = {:.6}\n",
            self.unique_trees, self.avg_depth, self.avg_size, self.avg_branching, self.max_branching
        )
    }

    /// One row per framework, side by side.
    pub fn table(rows: &[(&str, &TreeMetricsReport)]) -> String {
        let mut out = format!(
            "{:<12} {:>12} {:>8} {:>8} {:>14} {:>14}\n",
            "Framework", "Unique Trees", "Depth", "Size", "Avg. Branching", "Max Branching"
        );
        for (name, r) in rows {
            let _ = writeln!(
                out,
                "{:<12} {:>12} {:>8.2} {:>8.2} {:>14.2} {:>14.2}",
                name, r.unique_trees, r.avg_depth, r.avg_size, r.avg_branching, r.max_branching
            );
        }
        out
    }
}

/// Collapse, concatenate, induce and parse: labels → grammar and one tree per episode.
pub fn hierarchy_from_labels(labels: &[FrameLabeling]) -> Result<(Grammar, Vec<EpisodeTree>)> {
    let sequences = labels
        .iter()
        .enumerate()
        .map(|(i, l)| skill_sequence(l, i))
        .collect::<Result<Vec<_>>>()?;
    let grammar = induce(&build_corpus(&sequences)?);
    let trees = parse_trees(&grammar)?;
    Ok((grammar, trees))
}

/// Reference hierarchy built from clean truth labels.
pub fn ground_truth_hierarchy(truth: &[FrameLabeling]) -> Result<(Grammar, Vec<EpisodeTree>)> {
    hierarchy_from_labels(truth)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(t: usize) -> TreeNode {
        TreeNode::Leaf(t)
    }

    fn node(rule: Option<u32>, children: Vec<TreeNode>) -> TreeNode {
        TreeNode::Internal { rule, children }
    }

    fn tree(root: TreeNode) -> EpisodeTree {
        EpisodeTree { root }
    }

    #[test]
    fn stats_examples() {
        let s = tree_stats(&tree(node(None, vec![leaf(0)])));
        assert_eq!((s.depth, s.size, s.mean_branch, s.max_branch), (2, 2, 1.0, 1));

        let abc = || node(Some(2), vec![leaf(0), leaf(1), leaf(2)]);
        let s = tree_stats(&tree(node(None, vec![abc(), abc()])));
        assert_eq!((s.depth, s.size, s.max_branch), (3, 9, 3));
        assert!((s.mean_branch - 8.0 / 3.0).abs() < 1e-15);

        let s = tree_stats(&tree(node(None, vec![node(Some(1), vec![leaf(0), leaf(1)])])));
        assert_eq!((s.depth, s.size, s.mean_branch, s.max_branch), (3, 4, 1.5, 2));
    }

    #[test]
    fn unique_count_examples() {
        let a = tree(node(None, vec![node(Some(1), vec![leaf(0), leaf(1)])]));
        assert_eq!(unique_tree_count(&[a.clone(), a.clone(), a.clone()]), 1);
        let b = tree(node(None, vec![node(Some(1), vec![leaf(0), leaf(2)])]));
        assert_eq!(unique_tree_count(&[a.clone(), b]), 2);
        let renumbered = tree(node(None, vec![node(Some(7), vec![leaf(0), leaf(1)])]));
        assert_eq!(unique_tree_count(&[a, renumbered]), 1);
    }

    #[test]
    fn wsws_truth_is_one_tree_with_binary_branching() {
        let truth: Vec<_> = (0..5)
            .map(|_| FrameLabeling::from_labels(vec![0, 0, 1, 1, 1, 0, 1, 1]))
            .collect();
        let (_, trees) = ground_truth_hierarchy(&truth).unwrap();
        let r = TreeMetricsReport::from_trees(&trees);
        assert_eq!(r.unique_trees, 1);
        assert_eq!(r.max_branching, 2.0);
    }

    #[test]
    fn single_episode_hierarchy() {
        let (g, trees) = ground_truth_hierarchy(&[FrameLabeling::from_labels(vec![0, 1, 1, 2])]).unwrap();
        assert_eq!(trees.len(), 1);
        assert_eq!(g.start.len(), 3);
        assert!(g.rules.is_empty());
    }
}
