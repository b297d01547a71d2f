//! Line-oriented text format for graphs and trees.
//!
//! ```text
//! # comment
//! ROOT 1
//! EDGE 1 2 310.00
//! TREE 2 1
//! ```

use std::fmt::Write as _;

use super::{CollectionTree, ModelError, NetworkGraph, NodeId};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExportError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: {source}")]
    Model { line: usize, source: ModelError },
    #[error("tree lines present but no root could be determined")]
    NoRoot,
}

/// Parsed contents of an edge-list document.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EdgeList {
    pub root: Option<NodeId>,
    pub edges: Vec<(NodeId, NodeId, f64)>,
    pub tree: Vec<(NodeId, NodeId)>,
}

impl EdgeList {
    pub fn graph(&self) -> Result<NetworkGraph, ExportError> {
        let mut g = NetworkGraph::new();
        if let Some(r) = self.root {
            g.ensure_vertex(r);
        }
        for (i, &(u, v, w)) in self.edges.iter().enumerate() {
            g.set_edge(u, v, w)
                .map_err(|source| ExportError::Model { line: i + 1, source })?;
        }
        Ok(g)
    }

    /// The tree described by the `TREE` lines, if any. The root is the
    /// `ROOT` line or else the unique parent that never appears as a child.
    pub fn tree(&self) -> Result<Option<CollectionTree>, ExportError> {
        if self.tree.is_empty() {
            return Ok(self.root.map(CollectionTree::root_only));
        }
        let root = match self.root {
            Some(r) => r,
            None => {
                let children: std::collections::BTreeSet<NodeId> = self.tree.iter().map(|&(c, _)| c).collect();
                let mut roots: Vec<NodeId> = self
                    .tree
                    .iter()
                    .map(|&(_, p)| p)
                    .filter(|p| !children.contains(p))
                    .collect();
                roots.sort();
                roots.dedup();
                if roots.len() != 1 {
                    return Err(ExportError::NoRoot);
                }
                roots[0]
            }
        };
        Ok(Some(CollectionTree::from_parents(root, self.tree.iter().copied())))
    }
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T, ExportError> {
    let tok = tok.ok_or_else(|| ExportError::Syntax { line, msg: format!("missing {what}") })?;
    tok.parse().map_err(|_| ExportError::Syntax {
        line,
        msg: format!("invalid {what} {tok:?}"),
    })
}

pub fn parse_edge_list(text: &str) -> Result<EdgeList, ExportError> {
    let mut out = EdgeList::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut toks = body.split_whitespace();
        let tag = toks.next().unwrap_or_default();
        match tag {
            "ROOT" => {
                out.root = Some(NodeId(field(toks.next(), line, "root id")?));
            }
            "EDGE" => {
                let u = NodeId(field(toks.next(), line, "node id")?);
                let v = NodeId(field(toks.next(), line, "node id")?);
                let w: f64 = field(toks.next(), line, "weight")?;
                if u == v {
                    return Err(ExportError::Model { line, source: ModelError::SelfEdge(u) });
                }
                if !w.is_finite() || w < 0.0 {
                    return Err(ExportError::Model { line, source: ModelError::BadWeight(w) });
                }
                out.edges.push((u, v, w));
            }
            "TREE" => {
                let c = NodeId(field(toks.next(), line, "child id")?);
                let p = NodeId(field(toks.next(), line, "parent id")?);
                if c == p {
                    return Err(ExportError::Syntax { line, msg: format!("node {c} is its own parent") });
                }
                out.tree.push((c, p));
            }
            other => {
                return Err(ExportError::Syntax {
                    line,
                    msg: format!("unknown record {other:?}"),
                })
            }
        }
        if toks.next().is_some() {
            return Err(ExportError::Syntax { line, msg: "trailing fields".into() });
        }
    }
    Ok(out)
}

pub fn write_graph(graph: &NetworkGraph) -> String {
    let mut s = String::new();
    for (u, v, w) in graph.edges() {
        let _ = writeln!(s, "EDGE {u} {v} {w:.2}");
    }
    s
}

pub fn write_tree(tree: &CollectionTree) -> String {
    let mut s = format!("ROOT {}\n", tree.root);
    for (c, p) in tree.parent_pairs() {
        let _ = writeln!(s, "TREE {c} {p}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_and_tree_round_trip() {
        let mut g = NetworkGraph::new();
        g.set_edge(NodeId(1), NodeId(2), 310.0).unwrap();
        g.set_edge(NodeId(2), NodeId(3), 440.25).unwrap();
        let t = CollectionTree::from_parents(NodeId(1), [(NodeId(2), NodeId(1)), (NodeId(3), NodeId(2))]);
        let text = format!("# sample\n{}{}", write_graph(&g), write_tree(&t));
        let parsed = parse_edge_list(&text).unwrap();
        assert_eq!(parsed.graph().unwrap(), g);
        assert_eq!(parsed.tree().unwrap(), Some(t));
    }

    #[test]
    fn root_inferred_without_root_line() {
        let parsed = parse_edge_list("TREE 2 1\nTREE 3 2\n").unwrap();
        assert_eq!(parsed.tree().unwrap().unwrap().root, NodeId(1));
        let bad = parse_edge_list("TREE 2 1\nTREE 4 3\n").unwrap();
        assert_eq!(bad.tree(), Err(ExportError::NoRoot));
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        assert!(matches!(parse_edge_list("EDGE 1 2\n"), Err(ExportError::Syntax { line: 1, .. })));
        assert!(matches!(parse_edge_list("\nEDGE 1 x 3\n"), Err(ExportError::Syntax { line: 2, .. })));
        assert!(matches!(parse_edge_list("EDGE 1 1 3\n"), Err(ExportError::Model { line: 1, .. })));
        assert!(matches!(parse_edge_list("EDGE 1 2 -3\n"), Err(ExportError::Model { .. })));
        assert!(matches!(parse_edge_list("NODE 1\n"), Err(ExportError::Syntax { .. })));
        assert!(matches!(parse_edge_list("TREE 1 2 3\n"), Err(ExportError::Syntax { .. })));
    }
}
