//! NBM flooding: every node's neighbour list travels to the sink through
//! acknowledged broadcasts, each origin relayed at most once per node.

use super::{Ctx, FloodInFlight, Note, NodeMachine, NodeState, Timer};
use crate::model::NodeId;
use crate::wire::{NbmPayload, Payload, BROADCAST};

impl NodeMachine {
    pub(super) fn on_nbm(&mut self, ctx: &mut Ctx<'_>, src: NodeId, p: &NbmPayload) {
        if self.state == NodeState::Discovery {
            self.finalize(ctx);
        }
        if !self.state.radio_on() {
            return;
        }
        let ack = self.message(src, Payload::NbmAck { origin: p.origin });
        ctx.send(ack);
        if !matches!(self.state, NodeState::Flooding | NodeState::AwaitCdm) {
            return;
        }
        self.flood.last_heard = ctx.now;
        ctx.after(self.params.quiet_timeout_ms * 1000.0, Timer::FloodQuiet);
        if p.origin == self.id || !self.flood.seen.insert(p.origin) {
            return;
        }
        if let Some(sink) = self.sink.as_mut() {
            sink.record_nbm(p.clone());
            return;
        }
        if self.state == NodeState::AwaitCdm {
            self.set_state(ctx, NodeState::Flooding);
        }
        if self.flood.queue.len() >= self.params.nbm_queue_bound {
            let id = self.id;
            if let Some(pos) = self.flood.queue.iter().position(|q| q.origin != id) {
                let dropped = self.flood.queue.remove(pos).expect("index in range");
                ctx.note(Note::QueueDrop { origin: dropped.origin });
            }
        }
        self.flood.queue.push_back(p.clone());
        self.flood_schedule_kick(ctx);
    }

    fn flood_schedule_kick(&mut self, ctx: &mut Ctx<'_>) {
        if self.flood.inflight.is_none() && !self.flood.kick_pending && !self.flood.queue.is_empty() {
            self.flood.kick_pending = true;
            let d = self.backoff(ctx);
            ctx.after(d, Timer::FloodKick);
        }
    }

    pub(super) fn flood_pump(&mut self, ctx: &mut Ctx<'_>) {
        if self.flood.inflight.is_some() || !matches!(self.state, NodeState::Flooding | NodeState::AwaitCdm) {
            return;
        }
        let Some(p) = self.flood.queue.pop_front() else {
            return;
        };
        let msg = self.message(BROADCAST, Payload::Nbm(p));
        let awaiting = self.admitted.iter().map(|&(n, _)| n).collect();
        self.flood.inflight = Some(FloodInFlight { msg, tries: 0, awaiting });
        self.flood_transmit(ctx);
    }

    fn flood_transmit(&mut self, ctx: &mut Ctx<'_>) {
        let wait = self.ack_wait(ctx);
        let Some(f) = self.flood.inflight.as_mut() else {
            return;
        };
        f.tries += 1;
        let seq = f.msg.seq;
        ctx.send_try(f.msg.clone(), f.tries);
        ctx.after(wait, Timer::FloodRetry { seq });
    }

    pub(super) fn flood_retry(&mut self, ctx: &mut Ctx<'_>, seq: u32) {
        let Some(f) = self.flood.inflight.as_ref() else {
            return;
        };
        if f.msg.seq != seq {
            return;
        }
        if f.tries < self.params.max_retries && self.state.radio_on() {
            self.flood_transmit(ctx);
        } else {
            let missing: Vec<NodeId> = f.awaiting.iter().copied().collect();
            for peer in missing {
                ctx.note(Note::Timeout {
                    what: "nbm_ack",
                    peer: Some(peer),
                    slot: None,
                });
            }
            self.flood.inflight = None;
            self.flood_schedule_kick(ctx);
        }
    }

    pub(super) fn on_nbm_ack(&mut self, ctx: &mut Ctx<'_>, src: NodeId, origin: NodeId) {
        let Some(f) = self.flood.inflight.as_mut() else {
            return;
        };
        let Payload::Nbm(p) = &f.msg.payload else {
            return;
        };
        if p.origin != origin {
            return;
        }
        f.awaiting.remove(&src);
        if f.awaiting.is_empty() {
            self.flood.inflight = None;
            self.flood_schedule_kick(ctx);
        }
    }

    /// Completion check: the queue has drained and no NBM was heard for the
    /// quiet timeout.
    pub(super) fn flood_quiet(&mut self, ctx: &mut Ctx<'_>) {
        if !matches!(self.state, NodeState::Flooding | NodeState::AwaitCdm) {
            return;
        }
        let quiet = self.params.quiet_timeout_ms * 1000.0;
        if ctx.now - self.flood.last_heard < quiet - 1.0 {
            return;
        }
        if !self.flood.queue.is_empty() || self.flood.inflight.is_some() {
            ctx.after(quiet, Timer::FloodQuiet);
            return;
        }
        if self.is_sink {
            let heard = self.sink.as_ref().is_some_and(|s| s.nbm_count() > 0);
            let patience = ctx.now - self.flood.finalized_at >= 10.0 * quiet;
            if heard || self.admitted.is_empty() || patience {
                if !heard {
                    ctx.note(Note::Warn("building tree without any NBM".into()));
                }
                self.sink_build_tree(ctx);
            } else {
                ctx.after(quiet, Timer::FloodQuiet);
            }
        } else if self.state == NodeState::Flooding {
            self.set_state(ctx, NodeState::AwaitCdm);
        }
    }
}
