use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};

use super::{ModelError, NetworkGraph, NodeId};

/// Convergecast tree rooted at the sink.
///
/// `children` is kept as the exact inverse of `parent`, each list sorted by id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollectionTree {
    pub root: NodeId,
    pub parent: BTreeMap<NodeId, NodeId>,
    pub children: BTreeMap<NodeId, Vec<NodeId>>,
}

impl CollectionTree {
    /// A tree holding only the root.
    pub fn root_only(root: NodeId) -> Self {
        let mut children = BTreeMap::new();
        children.insert(root, Vec::new());
        Self {
            root,
            parent: BTreeMap::new(),
            children,
        }
    }

    /// Builds a tree from `(child, parent)` pairs.
    pub fn from_parents(root: NodeId, pairs: impl IntoIterator<Item = (NodeId, NodeId)>) -> Self {
        let mut tree = Self::root_only(root);
        for (c, p) in pairs {
            tree.parent.insert(c, p);
        }
        tree.rebuild_children();
        tree
    }

    fn rebuild_children(&mut self) {
        let mut children: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        children.insert(self.root, Vec::new());
        for (&c, &p) in &self.parent {
            children.entry(c).or_default();
            children.entry(p).or_default().push(c);
        }
        for list in children.values_mut() {
            list.sort();
        }
        self.children = children;
    }

    pub fn contains(&self, id: NodeId) -> bool {
        id == self.root || self.parent.contains_key(&id)
    }

    pub fn vertices(&self) -> impl Iterator<Item = NodeId> + '_ {
        std::iter::once(self.root).chain(self.parent.keys().copied())
    }

    pub fn len(&self) -> usize {
        self.parent.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn parent_of(&self, id: NodeId) -> Option<NodeId> {
        self.parent.get(&id).copied()
    }

    pub fn children_of(&self, id: NodeId) -> &[NodeId] {
        self.children.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        self.children_of(id).is_empty()
    }

    /// Hop count from `id` to the root.
    pub fn depth(&self, id: NodeId) -> Option<usize> {
        let mut cur = id;
        let mut hops = 0;
        while cur != self.root {
            cur = *self.parent.get(&cur)?;
            hops += 1;
            if hops > self.parent.len() {
                return None;
            }
        }
        Some(hops)
    }

    /// Longest downward hop count from `id` to a leaf of its subtree.
    pub fn height(&self, id: NodeId) -> usize {
        self.children_of(id)
            .iter()
            .map(|&c| 1 + self.height(c))
            .max()
            .unwrap_or(0)
    }

    /// All nodes strictly below `id`.
    pub fn descendants(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack: Vec<NodeId> = self.children_of(id).to_vec();
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend_from_slice(self.children_of(n));
        }
        out.sort();
        out
    }

    /// Sum of edge weights along the tree path from `id` up to the root,
    /// accumulated root-first.
    pub fn path_cost(&self, graph: &NetworkGraph, id: NodeId) -> Option<f64> {
        let mut path = vec![id];
        let mut cur = id;
        while cur != self.root {
            cur = *self.parent.get(&cur)?;
            path.push(cur);
            if path.len() > self.len() + 1 {
                return None;
            }
        }
        let mut cost = 0.0;
        for pair in path.windows(2).rev() {
            cost += graph.weight(pair[0], pair[1])?;
        }
        Some(cost)
    }

    /// Checks single parent, acyclicity, reachability of the root and that
    /// `children` inverts `parent`.
    pub fn is_consistent(&self) -> bool {
        if self.parent.contains_key(&self.root) {
            return false;
        }
        for &c in self.parent.keys() {
            if self.depth(c).is_none() {
                return false;
            }
        }
        let mut expected = self.clone();
        expected.rebuild_children();
        let mut mine = self.children.clone();
        mine.retain(|_, v| !v.is_empty());
        expected.children.retain(|_, v| !v.is_empty());
        mine == expected.children
    }

    /// `(child, parent)` pairs ordered by child id.
    pub fn parent_pairs(&self) -> Vec<(NodeId, NodeId)> {
        self.parent.iter().map(|(&c, &p)| (c, p)).collect()
    }
}

/// Result of a tree build: the tree over the reachable component plus the
/// vertices that could not be reached from the root.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeBuild {
    pub tree: CollectionTree,
    pub distance: BTreeMap<NodeId, f64>,
    pub unreachable: Vec<NodeId>,
}

#[derive(PartialEq)]
struct Frontier {
    dist: f64,
    node: NodeId,
}

impl Eq for Frontier {}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then_with(|| self.node.cmp(&other.node))
    }
}

/// Single-source shortest-path tree rooted at `root`.
///
/// Ties between equal-cost parents go to the smaller parent id and equal
/// frontier distances are settled smallest id first, so the tree is a pure
/// function of the graph.
pub fn dijkstra_spt(graph: &NetworkGraph, root: NodeId) -> Result<TreeBuild, ModelError> {
    if !graph.contains(root) {
        return Err(ModelError::MissingRoot(root));
    }
    let adj = graph.adjacency();
    let mut dist: BTreeMap<NodeId, f64> = BTreeMap::new();
    let mut parent: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    let mut settled: BTreeSet<NodeId> = BTreeSet::new();
    let mut heap = BinaryHeap::new();

    dist.insert(root, 0.0);
    heap.push(Reverse(Frontier { dist: 0.0, node: root }));

    while let Some(Reverse(Frontier { dist: d, node: u })) = heap.pop() {
        if !settled.insert(u) {
            continue;
        }
        for &(v, w) in adj.get(&u).map(Vec::as_slice).unwrap_or(&[]) {
            if settled.contains(&v) {
                continue;
            }
            let candidate = d + w;
            let better = match dist.get(&v) {
                None => true,
                Some(&cur) => {
                    candidate < cur || (candidate == cur && parent.get(&v).map_or(false, |&p| u < p))
                }
            };
            if better {
                dist.insert(v, candidate);
                parent.insert(v, u);
                heap.push(Reverse(Frontier { dist: candidate, node: v }));
            }
        }
    }

    let unreachable = graph.vertices().filter(|v| !settled.contains(v)).collect();
    Ok(TreeBuild {
        tree: CollectionTree::from_parents(root, parent),
        distance: dist,
        unreachable,
    })
}

/// Removes `failed` nodes (and their edges) from `graph` and rebuilds the
/// shortest-path tree. Nodes cut off by the removal come back as
/// `unreachable`.
pub fn rebuild_without(
    graph: &NetworkGraph,
    failed: &BTreeSet<NodeId>,
    root: NodeId,
) -> Result<TreeBuild, ModelError> {
    if failed.contains(&root) {
        return Err(ModelError::RootFailed(root));
    }
    dijkstra_spt(&graph.without(failed), root)
}
