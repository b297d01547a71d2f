//! Edge-set changes between consecutive network graphs.

use std::collections::BTreeSet;

use crate::engine::{EventKind, TraceRecord};
use crate::model::{CollectionTree, NetworkGraph, NodeId};

pub type EdgeSet = BTreeSet<(NodeId, NodeId)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GraphDiff {
    pub added: usize,
    pub removed: usize,
    pub retained: usize,
    pub common_to_all: usize,
}

/// Normalises an edge so `(u, v)` and `(v, u)` compare equal.
pub fn undirected(u: NodeId, v: NodeId) -> (NodeId, NodeId) {
    if u <= v {
        (u, v)
    } else {
        (v, u)
    }
}

/// One diff per consecutive pair; every diff carries the count of edges
/// present in all graphs.
pub fn graph_diff(graphs: &[EdgeSet]) -> Vec<GraphDiff> {
    let Some(first) = graphs.first() else {
        return Vec::new();
    };
    let common = graphs
        .iter()
        .skip(1)
        .fold(first.clone(), |acc, g| acc.intersection(g).copied().collect())
        .len();
    graphs
        .windows(2)
        .map(|w| {
            let retained = w[0].intersection(&w[1]).count();
            GraphDiff {
                added: w[1].len() - retained,
                removed: w[0].len() - retained,
                retained,
                common_to_all: common,
            }
        })
        .collect()
}

pub fn edge_set(graph: &NetworkGraph) -> EdgeSet {
    graph.edges().map(|(u, v, _)| undirected(u, v)).collect()
}

/// Graphs announced by the sink, in order, as `(round, epoch, edges)`.
pub fn graphs_from_trace(records: &[TraceRecord]) -> Vec<(u32, u32, EdgeSet)> {
    let mut out: Vec<(u32, u32, EdgeSet)> = Vec::new();
    for r in records.iter().filter(|r| r.event == EventKind::Edge) {
        let (Some(u), Some(v)) = (r.src, r.dst) else { continue };
        let round = r.round.unwrap_or(0);
        let epoch = r.get_parsed("epoch").unwrap_or(0);
        match out.last_mut() {
            Some((ro, ep, set)) if *ro == round && *ep == epoch => {
                set.insert(undirected(u, v));
            }
            _ => out.push((round, epoch, BTreeSet::from([undirected(u, v)]))),
        }
    }
    out
}

/// A tree announced by the sink together with the graph it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub round: u32,
    pub epoch: u32,
    pub graph: NetworkGraph,
    pub tree: CollectionTree,
}

/// Every tree announcement in the trace, paired with the latest graph.
pub fn snapshots(records: &[TraceRecord]) -> Vec<Snapshot> {
    let mut graph = NetworkGraph::new();
    let mut graph_key = None;
    let mut out: Vec<(u32, u32, NetworkGraph, NodeId, Vec<(NodeId, NodeId)>)> = Vec::new();
    for r in records {
        let round = r.round.unwrap_or(0);
        let epoch: u32 = r.get_parsed("epoch").unwrap_or(0);
        match r.event {
            EventKind::Edge => {
                let (Some(u), Some(v), Some(w)) = (r.src, r.dst, r.get_parsed::<f64>("w")) else { continue };
                if graph_key != Some((round, epoch)) {
                    graph_key = Some((round, epoch));
                    graph = NetworkGraph::new();
                }
                let _ = graph.set_edge(u, v, w);
            }
            EventKind::Tree => {
                let Some(src) = r.src else { continue };
                if r.get("root") == Some("1") {
                    out.push((round, epoch, graph.clone(), src, Vec::new()));
                } else if let (Some(last), Some(p)) = (out.last_mut(), r.dst) {
                    last.4.push((src, p));
                }
            }
            _ => {}
        }
    }
    out.into_iter()
        .map(|(round, epoch, graph, root, pairs)| Snapshot {
            round,
            epoch,
            graph,
            tree: CollectionTree::from_parents(root, pairs),
        })
        .collect()
}
