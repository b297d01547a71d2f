//! Sink-side graph assembly, tree construction and repair, and the CDM
//! exchange that distributes the tree to every node.

use std::collections::{BTreeMap, BTreeSet};

use super::{Ctx, Note, NodeMachine, NodeState, Pending, Timer};
use crate::model::{dijkstra_spt, rebuild_without, CollectionTree, NetworkGraph, NodeId};
use crate::wire::{NbmPayload, Payload};

/// Topology knowledge and repair bookkeeping held by the sink.
#[derive(Debug, Clone)]
pub struct SinkState {
    id: NodeId,
    round: u32,
    reports: BTreeMap<NodeId, NbmPayload>,
    graph: NetworkGraph,
    tree: CollectionTree,
    failed: BTreeSet<NodeId>,
    pub(super) pending_failures: bool,
    pub(super) tree_built: bool,
    pub(super) sync_started: bool,
    pub(super) settling: Option<u32>,
    pub(super) received_this_slot: BTreeSet<NodeId>,
}

impl SinkState {
    pub fn new(id: NodeId) -> Self {
        Self {
            id,
            round: 0,
            reports: BTreeMap::new(),
            graph: NetworkGraph::new(),
            tree: CollectionTree::root_only(id),
            failed: BTreeSet::new(),
            pending_failures: false,
            tree_built: false,
            sync_started: false,
            settling: None,
            received_this_slot: BTreeSet::new(),
        }
    }

    pub(super) fn reset(&mut self, round: u32) {
        *self = Self::new(self.id);
        self.round = round;
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn graph(&self) -> &NetworkGraph {
        &self.graph
    }

    pub fn tree(&self) -> &CollectionTree {
        &self.tree
    }

    pub fn failed(&self) -> &BTreeSet<NodeId> {
        &self.failed
    }

    pub fn nbm_count(&self) -> usize {
        self.reports.len()
    }

    pub fn reports(&self) -> &BTreeMap<NodeId, NbmPayload> {
        &self.reports
    }

    pub fn received_this_slot(&self) -> &BTreeSet<NodeId> {
        &self.received_this_slot
    }

    pub(super) fn record_nbm(&mut self, p: NbmPayload) {
        self.reports.entry(p.origin).or_insert(p);
    }
}

/// Builds the undirected graph from the sink's own links and the flooded
/// neighbour lists.
///
/// A pair reported in both directions takes the higher weight. A pair
/// reported by one side only is kept when the other side's list never
/// reached the sink, and dropped when that list is known and omits it.
pub fn assemble_graph(
    sink: NodeId,
    sink_capacity: f64,
    sink_links: &[(NodeId, f64)],
    reports: &BTreeMap<NodeId, NbmPayload>,
) -> NetworkGraph {
    let mut directed: BTreeMap<(NodeId, NodeId), f64> = BTreeMap::new();
    let mut known: BTreeSet<NodeId> = reports.keys().copied().collect();
    known.insert(sink);
    for &(peer, w) in sink_links {
        directed.insert((sink, peer), NbmPayload::weight(NbmPayload::to_centi(w)));
    }
    for (origin, p) in reports {
        if *origin == sink {
            continue;
        }
        for &(peer, centi) in &p.neighbours {
            if peer != *origin {
                directed.insert((*origin, peer), NbmPayload::weight(centi));
            }
        }
    }
    let mut g = NetworkGraph::new();
    g.add_vertex(sink, sink_capacity);
    for (origin, p) in reports {
        if *origin != sink {
            g.add_vertex(*origin, p.capacity.max(0.0));
        }
    }
    for (&(u, v), &w) in &directed {
        let w = match directed.get(&(v, u)) {
            Some(&back) => crate::model::symmetrize(w, back),
            None if known.contains(&v) => continue,
            None => w,
        };
        if g.weight(u, v).is_none() {
            g.set_edge(u, v, w).expect("weights are finite and non-negative");
        }
    }
    g
}

/// Root of a parent list: the one parent that is nobody's child.
fn root_of(parents: &[(NodeId, NodeId)]) -> Option<NodeId> {
    let children: BTreeSet<NodeId> = parents.iter().map(|&(c, _)| c).collect();
    parents.iter().map(|&(_, p)| p).find(|p| !children.contains(p))
}

impl NodeMachine {
    // ======================================================================
    // Sink: tree construction and repair

    pub(super) fn sink_build_tree(&mut self, ctx: &mut Ctx<'_>) {
        let capacity = self.capacity();
        let id = self.id;
        let Some(sink) = self.sink.as_mut() else {
            return;
        };
        if sink.tree_built {
            return;
        }
        let graph = assemble_graph(id, capacity, &self.admitted, &sink.reports);
        let build = dijkstra_spt(&graph, id).expect("sink is a vertex of its own graph");
        sink.graph = graph.clone();
        sink.tree = build.tree.clone();
        sink.tree_built = true;
        for &u in &build.unreachable {
            sink.failed.insert(u);
        }
        ctx.note(Note::Graph { epoch: 1, graph });
        ctx.note(Note::Tree {
            epoch: 1,
            tree: build.tree.clone(),
            unreachable: build.unreachable.clone(),
        });
        self.adopt_tree(&build.tree, 1);
        self.set_state(ctx, NodeState::Syncing);
        self.distribute_cdm(ctx, &build.tree);
        self.sink_maybe_start_sync(ctx);
    }

    fn sink_rebuild(&mut self, ctx: &mut Ctx<'_>) {
        let id = self.id;
        let epoch = self.epoch + 1;
        let Some(sink) = self.sink.as_mut() else {
            return;
        };
        let build = match rebuild_without(&sink.graph, &sink.failed, id) {
            Ok(b) => b,
            Err(e) => {
                ctx.note(Note::Warn(format!("rebuild failed: {e}")));
                return;
            }
        };
        for &u in &build.unreachable {
            if sink.failed.insert(u) {
                ctx.note(Note::Warn(format!("node {u} orphaned by repair")));
            }
        }
        sink.tree = build.tree.clone();
        sink.pending_failures = false;
        ctx.note(Note::Tree {
            epoch,
            tree: build.tree.clone(),
            unreachable: build.unreachable.clone(),
        });
        self.adopt_tree(&build.tree, epoch);
        self.distribute_cdm(ctx, &build.tree);
    }

    /// Records a failure at the sink and repairs immediately or at the end
    /// of the current slot.
    pub(super) fn sink_handle_failure(&mut self, ctx: &mut Ctx<'_>, failed: NodeId) {
        let Some(sink) = self.sink.as_mut() else {
            return;
        };
        if !sink.tree_built || !sink.failed.insert(failed) {
            return;
        }
        if !sink.sync_started {
            self.sink_rebuild(ctx);
            self.sink_maybe_start_sync(ctx);
        } else if sink.settling.is_some() {
            self.sink_rebuild(ctx);
            let epoch = self.epoch;
            if let Some(s) = self.sink.as_mut() {
                s.settling = Some(epoch);
            }
            ctx.after(self.params.rebuild_settle_ms * 1000.0, Timer::RebuildSettle { epoch });
        } else {
            sink.pending_failures = true;
        }
    }

    /// Repairs pending failures and schedules SLEEP after the settle delay.
    /// Returns false when nothing was pending.
    pub(super) fn sink_repair_before_sleep(&mut self, ctx: &mut Ctx<'_>) -> bool {
        let pending = self.sink.as_ref().is_some_and(|s| s.pending_failures);
        if !pending {
            return false;
        }
        self.sink_rebuild(ctx);
        let epoch = self.epoch;
        if let Some(s) = self.sink.as_mut() {
            s.settling = Some(epoch);
        }
        ctx.after(self.params.rebuild_settle_ms * 1000.0, Timer::RebuildSettle { epoch });
        true
    }

    pub(super) fn sink_settle_done(&mut self, ctx: &mut Ctx<'_>, epoch: u32) {
        let Some(sink) = self.sink.as_mut() else {
            return;
        };
        if sink.settling != Some(epoch) {
            return;
        }
        sink.settling = None;
        if self.state == NodeState::ActiveSlot {
            self.sink_sleep(ctx);
        }
    }

    // ======================================================================
    // CDM distribution (all nodes)

    fn adopt_tree(&mut self, tree: &CollectionTree, epoch: u32) {
        self.epoch = epoch;
        self.children = tree.children_of(self.id).to_vec();
        self.height = tree.height(self.id);
        self.locally_failed.clear();
        let children = &self.children;
        self.miss_counts.retain(|c, _| children.contains(c));
        self.sync.children_synced.retain(|c| children.contains(c));
        self.cdm_out.clear();
    }

    fn distribute_cdm(&mut self, ctx: &mut Ctx<'_>, tree: &CollectionTree) {
        let parents = tree.parent_pairs();
        for child in self.children.clone() {
            let msg = self.message(
                child,
                Payload::Cdm {
                    epoch: self.epoch,
                    parents: parents.clone(),
                },
            );
            self.cdm_out.insert(child, Pending { msg, tries: 0 });
            self.cdm_transmit(ctx, child);
        }
    }

    fn cdm_transmit(&mut self, ctx: &mut Ctx<'_>, child: NodeId) {
        let wait = self.ack_wait(ctx);
        let Some(p) = self.cdm_out.get_mut(&child) else {
            return;
        };
        p.tries += 1;
        let seq = p.msg.seq;
        ctx.send_try(p.msg.clone(), p.tries);
        ctx.after(wait, Timer::CdmRetry { child, seq });
    }

    pub(super) fn cdm_retry(&mut self, ctx: &mut Ctx<'_>, child: NodeId, seq: u32) {
        let Some(p) = self.cdm_out.get(&child) else {
            return;
        };
        if p.msg.seq != seq {
            return;
        }
        if p.tries < self.params.max_retries && self.state.radio_on() {
            self.cdm_transmit(ctx, child);
            return;
        }
        self.cdm_out.remove(&child);
        ctx.note(Note::Timeout {
            what: "cdm_ack",
            peer: Some(child),
            slot: None,
        });
        self.child_failed(ctx, child, "cdm");
        self.sink_maybe_start_sync(ctx);
    }

    pub(super) fn on_cdm(&mut self, ctx: &mut Ctx<'_>, src: NodeId, epoch: u32, parents: &[(NodeId, NodeId)]) {
        if self.is_sink {
            return;
        }
        let ack = self.message(src, Payload::CdmAck { epoch });
        ctx.send(ack);
        if epoch <= self.epoch {
            return;
        }
        let root = root_of(parents).unwrap_or(src);
        let tree = CollectionTree::from_parents(root, parents.iter().copied());
        let Some(parent) = tree.parent_of(self.id) else {
            self.epoch = epoch;
            ctx.note(Note::Warn("excluded from the collection tree".into()));
            self.parent = None;
            self.children.clear();
            self.cdm_out.clear();
            self.slot.current = None;
            self.slot.outgoing.clear();
            self.set_state(ctx, NodeState::Sleeping);
            return;
        };
        if self.parent != Some(parent) {
            self.slot.current = None;
            self.slot.outgoing.clear();
        }
        self.parent = Some(parent);
        self.adopt_tree(&tree, epoch);
        self.distribute_cdm(ctx, &tree);
        if matches!(
            self.state,
            NodeState::Discovery | NodeState::Flooding | NodeState::AwaitCdm
        ) {
            self.set_state(ctx, NodeState::Syncing);
        }
    }

    pub(super) fn on_cdm_ack(&mut self, ctx: &mut Ctx<'_>, src: NodeId, epoch: u32) {
        let matches = self
            .cdm_out
            .get(&src)
            .is_some_and(|p| matches!(p.msg.payload, Payload::Cdm { epoch: e, .. } if e == epoch));
        if matches {
            self.cdm_out.remove(&src);
            self.sink_maybe_start_sync(ctx);
        }
    }

    /// Declares a child failed and reports it towards the sink.
    pub(super) fn child_failed(&mut self, ctx: &mut Ctx<'_>, child: NodeId, via: &'static str) {
        if !self.locally_failed.insert(child) {
            return;
        }
        let slot = self.current_slot();
        ctx.note(Note::NodeFailDetect {
            failed: child,
            slot,
            via,
        });
        if self.is_sink {
            self.sink_handle_failure(ctx, child);
        } else {
            self.nodefail_queue.push_back((child, self.id));
            self.nodefail_pump(ctx);
        }
    }
}
