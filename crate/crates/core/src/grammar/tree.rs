use std::fmt::Write as _;

use super::{Grammar, Symbol};
use crate::error::Result;
use crate::model::{EpisodeTree, TreeNode};

fn build(grammar: &Grammar, sym: Symbol) -> TreeNode {
    match sym {
        Symbol::Terminal(t) => TreeNode::Leaf(t as usize),
        Symbol::NonTerminal(r) => TreeNode::Internal {
            rule: Some(r),
            children: grammar.rules[&r].iter().map(|&s| build(grammar, s)).collect(),
        },
        Symbol::Boundary => unreachable!("boundaries only separate start slices"),
    }
}

/// One derivation tree per episode. The root is a synthetic episode node whose
/// children are that episode's slice of the start body.
pub fn parse_trees(grammar: &Grammar) -> Result<Vec<EpisodeTree>> {
    grammar.check_acyclic()?;
    Ok(grammar
        .start
        .split(|s| *s == Symbol::Boundary)
        .map(|slice| EpisodeTree {
            root: TreeNode::Internal {
                rule: None,
                children: slice.iter().map(|&s| build(grammar, s)).collect(),
            },
        })
        .collect())
}

fn escape(label: &str) -> String {
    label.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz description of one tree. Leaves use `skill_names` when given.
pub fn to_dot(tree: &EpisodeTree, skill_names: Option<&[String]>) -> String {
    let mut out = String::from("digraph episode {\n  node [shape=box];\n");
    let mut counter = 0usize;
    let mut stack = vec![(&tree.root, None::<usize>)];
    while let Some((node, parent)) = stack.pop() {
        let id = counter;
        counter += 1;
        let label = match node {
            TreeNode::Leaf(t) => skill_names
                .and_then(|names| names.get(*t))
                .cloned()
                .unwrap_or_else(|| format!("skill_{t}")),
            TreeNode::Internal { rule: Some(r), .. } => format!("R{r}"),
            TreeNode::Internal { rule: None, .. } => "episode".to_string(),
        };
        let shape = match node {
            TreeNode::Leaf(_) => "box",
            TreeNode::Internal { .. } => "ellipse",
        };
        let _ = writeln!(out, "  n{id} [label=\"{}\", shape={shape}];", escape(&label));
        if let Some(p) = parent {
            let _ = writeln!(out, "  n{p} -> n{id};");
        }
        if let TreeNode::Internal { children, .. } = node {
            for c in children.iter().rev() {
                stack.push((c, Some(id)));
            }
        }
    }
    out.push_str("}\n");
    out
}
