//! Neighbour discovery: periodic NDM beacons, the neighbour table and the
//! admission rule that turns it into weighted links.

use rand::Rng;

use super::{Ctx, Note, NodeMachine, NodeState, ProtocolParams, Timer};
use crate::link::tier_cost;
use crate::model::{edge_weight, LinkRecord, NodeId};
use crate::wire::{NbmPayload, Payload, BROADCAST};

/// A neighbour that passed admission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Admitted {
    pub peer: NodeId,
    pub avg_rssi: f64,
    pub weight: f64,
}

/// Keeps peers heard often and strongly enough and weights each link.
///
/// A peer is admitted when its delivery ratio reaches the admission
/// fraction and its average RSSI reaches the threshold. Links to peers
/// that advertise no remaining capacity are dropped.
pub fn finalize_neighbours<'a>(
    records: impl IntoIterator<Item = &'a LinkRecord>,
    own_capacity: f64,
    params: &ProtocolParams,
) -> Vec<Admitted> {
    let mut out = Vec::new();
    for rec in records {
        if rec.delivery_ratio() < params.admission_fraction || rec.avg_rssi < params.rssi_threshold {
            continue;
        }
        let Ok(mut weight) = edge_weight(own_capacity, rec.remote_capacity, rec.avg_rssi, params.k1, params.k2) else {
            continue;
        };
        if params.tiering {
            match tier_cost(rec.avg_rssi, params.rssi_threshold) {
                Ok(offset) => weight += offset,
                Err(_) => continue,
            }
        }
        out.push(Admitted {
            peer: rec.peer,
            avg_rssi: rec.avg_rssi,
            weight,
        });
    }
    out.sort_by_key(|a| a.peer);
    out
}

impl NodeMachine {
    pub(super) fn start_discovery(&mut self, ctx: &mut Ctx<'_>) {
        if self.is_sink {
            self.begin_ndm(ctx);
        } else {
            ctx.after(self.params.discovery_giveup_ms * 1000.0, Timer::DiscoveryGiveUp);
        }
    }

    fn begin_ndm(&mut self, ctx: &mut Ctx<'_>) {
        if self.discovery.started {
            return;
        }
        self.discovery.started = true;
        let interval = self.params.ndm_interval_ms * 1000.0;
        let delay = ctx.rng.gen_range(0.0..interval);
        ctx.after(delay, Timer::NdmSend { index: 0 });
        let window = (self.params.ndm_window_ms + self.params.discovery_guard_ms) * 1000.0;
        ctx.after(delay + window, Timer::DiscoveryEnd);
    }

    pub(super) fn send_ndm(&mut self, ctx: &mut Ctx<'_>, index: u16) {
        if self.state != NodeState::Discovery || self.discovery.finalized {
            return;
        }
        let total = self.params.ndm_count as u16;
        let msg = self.message(
            BROADCAST,
            Payload::Ndm {
                index,
                total,
                capacity: self.capacity(),
            },
        );
        ctx.send(msg);
        if index + 1 < total {
            ctx.after(self.params.ndm_interval_ms * 1000.0, Timer::NdmSend { index: index + 1 });
        }
    }

    pub(super) fn on_ndm(&mut self, ctx: &mut Ctx<'_>, src: NodeId, rssi: f64, total: u16, capacity: f64) {
        if self.state != NodeState::Discovery || self.discovery.finalized {
            return;
        }
        let rec = self
            .neighbour_table
            .entry(src)
            .or_insert_with(|| LinkRecord::new(src, u32::from(total)));
        rec.ndm_expected = rec.ndm_expected.max(u32::from(total));
        rec.observe(rssi.clamp(-100.0, 0.0), capacity);
        self.begin_ndm(ctx);
    }

    /// Closes discovery and moves on to flooding.
    pub(super) fn finalize(&mut self, ctx: &mut Ctx<'_>) {
        if self.discovery.finalized || self.state != NodeState::Discovery {
            return;
        }
        self.discovery.finalized = true;
        let admitted = finalize_neighbours(self.neighbour_table.values(), self.capacity(), &self.params);
        ctx.note(Note::Neighbours(
            admitted.iter().map(|a| (a.peer, a.avg_rssi, a.weight)).collect(),
        ));
        self.admitted = admitted.iter().map(|a| (a.peer, a.weight)).collect();
        self.flood.finalized_at = ctx.now;
        self.flood.last_heard = ctx.now;
        if self.admitted.is_empty() {
            ctx.note(Note::Isolated);
            if self.is_sink {
                self.set_state(ctx, NodeState::Flooding);
                self.sink_build_tree(ctx);
            } else {
                self.set_state(ctx, NodeState::Sleeping);
            }
            return;
        }
        self.set_state(ctx, NodeState::Flooding);
        if !self.is_sink {
            let own = NbmPayload {
                origin: self.id,
                neighbours: self
                    .admitted
                    .iter()
                    .map(|&(p, w)| (p, NbmPayload::to_centi(w)))
                    .collect(),
                capacity: self.capacity(),
            };
            self.flood.queue.push_front(own);
            let stagger = self.params.flood_stagger_ms * 1000.0;
            let delay = if stagger > 0.0 { ctx.rng.gen_range(0.0..stagger) } else { 0.0 };
            self.flood.kick_pending = true;
            ctx.after(delay, Timer::FloodKick);
        }
        ctx.after(self.params.quiet_timeout_ms * 1000.0, Timer::FloodQuiet);
    }
}
