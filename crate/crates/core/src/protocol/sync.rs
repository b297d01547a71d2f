//! Time synchronization down the tree: SYNC beacons carry the sender's
//! global-time estimate, SYNCED reports travel back up, and the sink fixes
//! the trigger instant of the first collection slot.

use super::{Ctx, Note, NodeMachine, NodeState, Timer};
use crate::model::NodeId;
use crate::wire::{Payload, BROADCAST};

impl NodeMachine {
    /// Stores one `(local receive, sender global)` pair and refreshes the
    /// skew estimate.
    pub(super) fn add_reference(&mut self, ctx: &mut Ctx<'_>, rx_local: f64, mac_global: f64) {
        if let Some((last, _)) = self.sync_table.points().last() {
            if (rx_local - last).abs() < 1_000.0 {
                return;
            }
        }
        match self.sync_table.add_reference_point(rx_local, mac_global) {
            Ok(()) => {
                if let Some(est) = self.sync_table.estimate_skew() {
                    self.estimate = est;
                }
            }
            Err(e) => ctx.note(Note::Warn(format!("reference point rejected: {e}"))),
        }
    }

    pub(super) fn broadcast_sync(&mut self, ctx: &mut Ctx<'_>) {
        let trigger = self.sync.trigger.map(|t| t.round() as u64);
        let mut msg = self.message(BROADCAST, Payload::Sync { trigger });
        msg.mac_timestamp = Some(self.global_at(ctx.now).max(0.0).round() as u64);
        ctx.send(msg);
    }

    fn start_ticking(&mut self, ctx: &mut Ctx<'_>) {
        if self.sync.ticking {
            return;
        }
        self.sync.ticking = true;
        let d = self.backoff(ctx);
        ctx.after(d, Timer::SyncTick);
    }

    pub(super) fn sync_tick(&mut self, ctx: &mut Ctx<'_>) {
        if !self.sync.ticking || self.state != NodeState::Syncing {
            self.sync.ticking = false;
            return;
        }
        if let Some(t) = self.sync.trigger {
            if self.global_at(ctx.now) >= t {
                self.sync.ticking = false;
                return;
            }
        }
        if self.live_children().next().is_some() {
            self.broadcast_sync(ctx);
        }
        ctx.after(self.params.sync_interval_ms * 1000.0, Timer::SyncTick);
    }

    /// Arms the first slot alarm for a global trigger instant.
    fn learn_trigger(&mut self, ctx: &mut Ctx<'_>, trigger: f64) {
        self.sync.trigger = Some(trigger);
        self.arm_slot(ctx, 0, trigger);
    }

    pub(super) fn arm_slot(&mut self, ctx: &mut Ctx<'_>, slot: u32, global_us: f64) {
        self.alarm_gen = self.alarm_gen.wrapping_add(1);
        let at = self.local_for_global(global_us);
        ctx.at(
            at,
            Timer::SlotStart {
                slot,
                global_us,
                alarm: self.alarm_gen,
            },
        );
    }

    pub(super) fn on_sync(&mut self, ctx: &mut Ctx<'_>, src: NodeId, mac: f64, trigger: Option<u64>, rx_local: f64) {
        if self.is_sink || self.parent != Some(src) || self.state != NodeState::Syncing {
            return;
        }
        self.add_reference(ctx, rx_local, mac);
        let first = !self.sync.synced;
        self.sync.synced = true;
        match (trigger, self.sync.trigger) {
            (Some(t), None) => {
                self.learn_trigger(ctx, t as f64);
                if !first && !self.is_leaf() {
                    self.broadcast_sync(ctx);
                }
            }
            (_, Some(t)) => {
                // Later beacons refine the estimate; re-aim the pending alarm.
                if self.global_at(ctx.now) < t {
                    self.arm_slot(ctx, 0, t);
                }
            }
            (None, None) => {}
        }
        if first && !self.is_leaf() {
            self.start_ticking(ctx);
        }
        self.maybe_report_synced(ctx);
    }

    pub(super) fn on_synced(&mut self, ctx: &mut Ctx<'_>, src: NodeId) {
        if !self.children.contains(&src) {
            return;
        }
        self.sync.children_synced.insert(src);
        self.maybe_report_synced(ctx);
    }

    fn maybe_report_synced(&mut self, ctx: &mut Ctx<'_>) {
        if !self.sync.synced || self.sync.sent_synced || self.state != NodeState::Syncing {
            return;
        }
        let all = self.live_children().all(|c| self.sync.children_synced.contains(&c));
        if !all {
            return;
        }
        if self.is_sink {
            self.sink_sync_complete(ctx);
        } else if let Some(parent) = self.parent {
            self.sync.sent_synced = true;
            let msg = self.message(parent, Payload::Synced);
            ctx.send(msg);
        }
    }

    // ======================================================================
    // Sink side

    pub(super) fn sink_maybe_start_sync(&mut self, ctx: &mut Ctx<'_>) {
        let Some(sink) = self.sink.as_mut() else {
            return;
        };
        if sink.sync_started || !sink.tree_built || !self.cdm_out.is_empty() {
            return;
        }
        sink.sync_started = true;
        ctx.after(self.params.cdm_settle_ms * 1000.0, Timer::SyncStart);
    }

    pub(super) fn sink_sync_start(&mut self, ctx: &mut Ctx<'_>) {
        if self.state != NodeState::Syncing || self.sync.synced {
            return;
        }
        self.sync.synced = true;
        ctx.after(self.params.sync_fallback_ms * 1000.0, Timer::SyncFallback);
        if !self.is_leaf() {
            self.start_ticking(ctx);
        }
        self.maybe_report_synced(ctx);
    }

    pub(super) fn sink_sync_fallback(&mut self, ctx: &mut Ctx<'_>) {
        if self.state == NodeState::Syncing && !self.sync.sent_synced {
            ctx.note(Note::Warn("synchronization incomplete, setting trigger anyway".into()));
            self.sink_sync_complete(ctx);
        }
    }

    fn sink_sync_complete(&mut self, ctx: &mut Ctx<'_>) {
        if self.sync.sent_synced {
            return;
        }
        self.sync.sent_synced = true;
        let trigger = (ctx.now + self.params.trigger_delay_ms * 1000.0).round();
        ctx.note(Note::Trigger { global_us: trigger });
        self.learn_trigger(ctx, trigger);
        if !self.is_leaf() {
            self.broadcast_sync(ctx);
        }
    }
}
