//! Graphviz export: questions as diamonds, leaves as boxes, one labeled edge
//! per answer.

use std::fmt::Write as _;

use crate::tree::{ensure_valid, DecisionTree, Node, TreeError};

fn quoted(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' | '\\' => {
                out.push('\\');
                out.push(c);
            }
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// DOT text for a valid tree. Node statements come first in depth-first
/// preorder, followed by the edges in the same order.
pub fn to_dot(tree: &DecisionTree) -> Result<String, TreeError> {
    ensure_valid(tree)?;
    let order = tree.preorder();
    let mut out = format!("digraph {} {{\n", quoted(&tree.id));
    for node in &order {
        let (shape, label) = match node {
            Node::Question(q) => ("diamond", &q.prompt),
            Node::Leaf(l) => ("box", &l.prescription),
        };
        let _ = writeln!(out, "  {} [shape={shape}, label={}];", quoted(node.id()), quoted(label));
    }
    for node in &order {
        if let Node::Question(q) = node {
            for a in &q.answers {
                let _ = writeln!(out, "  {} -> {} [label={}];", quoted(&q.id), quoted(&a.target), quoted(&a.label));
            }
        }
    }
    out.push_str("}\n");
    Ok(out)
}
