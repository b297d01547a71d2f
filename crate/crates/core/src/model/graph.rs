use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{ModelError, NodeId};

/// Undirected weighted topology assembled at the sink.
///
/// Edges are keyed by the ordered pair `(min, max)` so the edge set is
/// symmetric by construction.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NetworkGraph {
    vertices: BTreeMap<NodeId, f64>,
    edges: BTreeMap<(NodeId, NodeId), f64>,
}

fn key(u: NodeId, v: NodeId) -> (NodeId, NodeId) {
    if u <= v {
        (u, v)
    } else {
        (v, u)
    }
}

impl NetworkGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds or updates a vertex with its remaining capacity in mAh.
    pub fn add_vertex(&mut self, id: NodeId, capacity: f64) {
        self.vertices.insert(id, capacity);
    }

    /// Adds a vertex if absent, leaving an existing capacity untouched.
    pub fn ensure_vertex(&mut self, id: NodeId) {
        self.vertices.entry(id).or_insert(0.0);
    }

    /// Inserts an undirected edge, creating missing endpoints.
    pub fn set_edge(&mut self, u: NodeId, v: NodeId, weight: f64) -> Result<(), ModelError> {
        if u == v {
            return Err(ModelError::SelfEdge(u));
        }
        if !weight.is_finite() || weight < 0.0 {
            return Err(ModelError::BadWeight(weight));
        }
        self.ensure_vertex(u);
        self.ensure_vertex(v);
        self.edges.insert(key(u, v), weight);
        Ok(())
    }

    pub fn weight(&self, u: NodeId, v: NodeId) -> Option<f64> {
        self.edges.get(&key(u, v)).copied()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.vertices.contains_key(&id)
    }

    pub fn capacity(&self, id: NodeId) -> Option<f64> {
        self.vertices.get(&id).copied()
    }

    pub fn vertices(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.vertices.keys().copied()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(u, v, weight)` with `u < v`, in key order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        self.edges.iter().map(|(&(u, v), &w)| (u, v, w))
    }

    pub fn edge_set(&self) -> BTreeSet<(NodeId, NodeId)> {
        self.edges.keys().copied().collect()
    }

    /// Adjacency lists with neighbours sorted by id.
    pub fn adjacency(&self) -> BTreeMap<NodeId, Vec<(NodeId, f64)>> {
        let mut adj: BTreeMap<NodeId, Vec<(NodeId, f64)>> =
            self.vertices.keys().map(|&v| (v, Vec::new())).collect();
        for (&(u, v), &w) in &self.edges {
            adj.entry(u).or_default().push((v, w));
            adj.entry(v).or_default().push((u, w));
        }
        for list in adj.values_mut() {
            list.sort_by_key(|&(n, _)| n);
        }
        adj
    }

    pub fn degree(&self, id: NodeId) -> usize {
        self.edges.keys().filter(|&&(u, v)| u == id || v == id).count()
    }

    pub fn max_degree(&self) -> usize {
        let mut deg: BTreeMap<NodeId, usize> = BTreeMap::new();
        for &(u, v) in self.edges.keys() {
            *deg.entry(u).or_default() += 1;
            *deg.entry(v).or_default() += 1;
        }
        deg.values().copied().max().unwrap_or(0)
    }

    /// Copy of the graph with the given vertices and their incident edges removed.
    pub fn without(&self, removed: &BTreeSet<NodeId>) -> NetworkGraph {
        NetworkGraph {
            vertices: self
                .vertices
                .iter()
                .filter(|(id, _)| !removed.contains(id))
                .map(|(&id, &c)| (id, c))
                .collect(),
            edges: self
                .edges
                .iter()
                .filter(|((u, v), _)| !removed.contains(u) && !removed.contains(v))
                .map(|(&k, &w)| (k, w))
                .collect(),
        }
    }
}
