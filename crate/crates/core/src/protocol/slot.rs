//! Collection slots: sensing, bottom-up aggregation with per-packet
//! acknowledgements, failure detection by consecutive misses, the SLEEP
//! wave, and the NODEFAIL channel that carries failures to the sink.

use std::collections::BTreeSet;

use super::{Ctx, Note, NodeMachine, NodeState, Pending, SlotState, Timer};
use crate::model::{NodeId, SensorReading};
use crate::wire::{Payload, BROADCAST};

impl NodeMachine {
    pub(super) fn slot_start(&mut self, ctx: &mut Ctx<'_>, slot: u32, global_us: f64) {
        if slot >= self.params.slots_per_round || !matches!(self.state, NodeState::Syncing | NodeState::Sleeping) {
            return;
        }
        if self.parent.is_none() && !self.is_sink {
            return;
        }
        ctx.note(Note::Wake { slot, global_us });
        self.set_state(ctx, NodeState::ActiveSlot);
        self.sync.ticking = false;
        let expected: BTreeSet<NodeId> = self.live_children().collect();
        self.slot = SlotState {
            index: slot,
            expected,
            ..SlotState::default()
        };
        if let Some(s) = self.sink.as_mut() {
            s.received_this_slot.clear();
        }
        let reading = self.sensor_reading(ctx);
        self.slot.buffer.push((self.id, reading));
        if !self.is_sink {
            ctx.after(self.params.sleep_timeout_ms * 1000.0, Timer::SleepTimeout { slot });
        }
        if let Some(p) = self.nodefail_current.take() {
            if let Payload::NodeFail { failed, reporter } = p.msg.payload {
                self.nodefail_queue.push_front((failed, reporter));
            }
        }
        self.nodefail_schedule_kick(ctx);
        let initial = self.params.initial_slot_delay_ms * 1000.0;
        if self.slot.expected.is_empty() {
            let d = initial + self.backoff(ctx);
            ctx.after(d, Timer::SlotSend { slot });
        } else {
            let deadline = self.subtree_deadline();
            ctx.after(deadline, Timer::SlotSend { slot });
        }
    }

    /// How long a non-leaf waits for its subtree before forwarding anyway.
    fn subtree_deadline(&self) -> f64 {
        let per_level = self.params.child_timeout_ms * self.height as f64;
        (self.params.initial_slot_delay_ms + per_level).min(self.params.dc_timeout_ms) * 1000.0
    }

    pub(super) fn slot_send(&mut self, ctx: &mut Ctx<'_>, slot: u32) {
        if self.state != NodeState::ActiveSlot || slot != self.slot.index || self.slot.forwarded {
            return;
        }
        self.forward(ctx);
    }

    fn forward(&mut self, ctx: &mut Ctx<'_>) {
        self.slot.forwarded = true;
        let slot = self.slot.index;
        let expected: Vec<NodeId> = self.slot.expected.iter().copied().collect();
        for c in expected {
            if self.slot.complete.contains(&c) {
                self.miss_counts.insert(c, 0);
                continue;
            }
            let misses = self.miss_counts.entry(c).or_insert(0);
            *misses += 1;
            let misses = *misses;
            ctx.note(Note::Timeout {
                what: "child_data",
                peer: Some(c),
                slot: Some(slot),
            });
            if misses >= self.params.failure_miss_threshold {
                self.child_failed(ctx, c, "miss");
            }
        }
        if self.is_sink {
            self.sink_finish_slot(ctx);
            return;
        }
        let buffer = std::mem::take(&mut self.slot.buffer);
        for chunk in buffer.chunks(self.params.payload_capacity) {
            self.slot.outgoing.push_back(chunk.to_vec());
        }
        self.data_pump(ctx);
    }

    fn data_schedule_kick(&mut self, ctx: &mut Ctx<'_>) {
        if self.slot.current.is_none() && !self.slot.kick_pending && !self.slot.outgoing.is_empty() {
            self.slot.kick_pending = true;
            let d = self.backoff(ctx);
            ctx.after(d, Timer::DataKick { slot: self.slot.index });
        }
    }

    pub(super) fn data_pump(&mut self, ctx: &mut Ctx<'_>) {
        if self.slot.current.is_some() || self.state != NodeState::ActiveSlot {
            return;
        }
        let Some(parent) = self.parent else {
            self.slot.outgoing.clear();
            return;
        };
        let Some(readings) = self.slot.outgoing.pop_front() else {
            return;
        };
        let more = !self.slot.outgoing.is_empty();
        let msg = self.message(
            parent,
            Payload::Data {
                slot: self.slot.index,
                more,
                readings,
            },
        );
        self.slot.current = Some(Pending { msg, tries: 0 });
        self.data_transmit(ctx);
    }

    fn data_transmit(&mut self, ctx: &mut Ctx<'_>) {
        let wait = self.ack_wait(ctx);
        let Some(p) = self.slot.current.as_mut() else {
            return;
        };
        p.tries += 1;
        let seq = p.msg.seq;
        ctx.send_try(p.msg.clone(), p.tries);
        ctx.after(wait, Timer::DataRetry { seq });
    }

    pub(super) fn data_retry(&mut self, ctx: &mut Ctx<'_>, seq: u32) {
        let Some(p) = self.slot.current.as_ref() else {
            return;
        };
        if p.msg.seq != seq || self.state != NodeState::ActiveSlot {
            return;
        }
        if p.tries < self.params.max_retries {
            self.data_transmit(ctx);
            return;
        }
        ctx.note(Note::Timeout {
            what: "data_ack",
            peer: self.parent,
            slot: Some(self.slot.index),
        });
        self.slot.current = None;
        self.data_schedule_kick(ctx);
    }

    pub(super) fn on_data_ack(&mut self, ctx: &mut Ctx<'_>, src: NodeId, slot: u32, acked: u32) {
        if self.parent != Some(src) || slot != self.slot.index {
            return;
        }
        if self.slot.current.as_ref().is_some_and(|p| p.msg.seq == acked) {
            self.slot.current = None;
            self.data_schedule_kick(ctx);
        }
    }

    pub(super) fn on_data(
        &mut self,
        ctx: &mut Ctx<'_>,
        src: NodeId,
        seq: u32,
        slot: u32,
        more: bool,
        readings: &[(NodeId, SensorReading)],
    ) {
        if self.state != NodeState::ActiveSlot || slot != self.slot.index || !self.children.contains(&src) {
            return;
        }
        let ack = self.message(src, Payload::DataAck { slot, acked: seq });
        ctx.send(ack);
        if !self.slot.seen.insert((src, seq)) {
            return;
        }
        if !more {
            self.slot.complete.insert(src);
            self.miss_counts.insert(src, 0);
        }
        if !self.slot.forwarded {
            self.slot.buffer.extend_from_slice(readings);
            if self.slot.expected.iter().all(|c| self.slot.complete.contains(c)) {
                self.forward(ctx);
            }
        } else if self.is_sink {
            self.sink_record(ctx, readings);
        } else {
            for chunk in readings.chunks(self.params.payload_capacity) {
                self.slot.outgoing.push_back(chunk.to_vec());
            }
            self.data_schedule_kick(ctx);
        }
    }

    pub(super) fn on_sleep(&mut self, ctx: &mut Ctx<'_>, src: NodeId, slot: u32, mac: f64, rx_local: f64) {
        if self.is_sink || self.parent != Some(src) || self.state != NodeState::ActiveSlot || slot != self.slot.index {
            return;
        }
        self.add_reference(ctx, rx_local, mac);
        if !self.children.is_empty() {
            self.broadcast_sleep(ctx);
        }
        self.go_to_sleep(ctx);
    }

    pub(super) fn sleep_timeout(&mut self, ctx: &mut Ctx<'_>, slot: u32) {
        if self.state != NodeState::ActiveSlot || slot != self.slot.index {
            return;
        }
        ctx.note(Note::Timeout {
            what: "sleep",
            peer: self.parent,
            slot: Some(slot),
        });
        self.go_to_sleep(ctx);
    }

    fn broadcast_sleep(&mut self, ctx: &mut Ctx<'_>) {
        let mut msg = self.message(BROADCAST, Payload::Sleep { slot: self.slot.index });
        msg.mac_timestamp = Some(self.global_at(ctx.now).max(0.0).round() as u64);
        ctx.send(msg);
    }

    fn go_to_sleep(&mut self, ctx: &mut Ctx<'_>) {
        self.slot.current = None;
        self.slot.outgoing.clear();
        self.set_state(ctx, NodeState::Sleeping);
        let next = self.slot.index + 1;
        if next < self.params.slots_per_round {
            if let Some(trigger) = self.sync.trigger {
                let global = trigger + f64::from(next) * self.params.dci_us();
                self.arm_slot(ctx, next, global);
            }
        }
    }

    // ======================================================================
    // Sink

    fn sink_record(&mut self, ctx: &mut Ctx<'_>, readings: &[(NodeId, SensorReading)]) {
        let slot = self.slot.index;
        let Some(sink) = self.sink.as_mut() else {
            return;
        };
        for &(origin, reading) in readings {
            if sink.received_this_slot.insert(origin) {
                ctx.note(Note::Reading { slot, origin, reading });
            }
        }
    }

    fn sink_finish_slot(&mut self, ctx: &mut Ctx<'_>) {
        let buffer = std::mem::take(&mut self.slot.buffer);
        self.sink_record(ctx, &buffer);
        let Some(sink) = self.sink.as_ref() else {
            return;
        };
        let expected = sink.tree().len();
        let received = sink.received_this_slot.len();
        ctx.note(Note::Collect {
            slot: self.slot.index,
            received,
            expected,
        });
        if !self.sink_repair_before_sleep(ctx) {
            self.sink_sleep(ctx);
        }
    }

    pub(super) fn sink_sleep(&mut self, ctx: &mut Ctx<'_>) {
        if self.live_children().next().is_some() {
            self.broadcast_sleep(ctx);
        }
        self.go_to_sleep(ctx);
    }

    // ======================================================================
    // NODEFAIL channel

    pub(super) fn nodefail_pump(&mut self, ctx: &mut Ctx<'_>) {
        if self.nodefail_current.is_some() || !self.state.radio_on() {
            return;
        }
        let Some(parent) = self.parent else {
            self.nodefail_queue.clear();
            return;
        };
        let Some((failed, reporter)) = self.nodefail_queue.pop_front() else {
            return;
        };
        let msg = self.message(parent, Payload::NodeFail { failed, reporter });
        self.nodefail_current = Some(Pending { msg, tries: 0 });
        self.nodefail_transmit(ctx);
    }

    fn nodefail_transmit(&mut self, ctx: &mut Ctx<'_>) {
        let wait = self.ack_wait(ctx);
        let Some(p) = self.nodefail_current.as_mut() else {
            return;
        };
        p.tries += 1;
        let seq = p.msg.seq;
        ctx.send_try(p.msg.clone(), p.tries);
        ctx.after(wait, Timer::NodeFailRetry { seq });
    }

    fn nodefail_schedule_kick(&mut self, ctx: &mut Ctx<'_>) {
        if self.nodefail_current.is_none() && !self.nodefail_kick_pending && !self.nodefail_queue.is_empty() {
            self.nodefail_kick_pending = true;
            let d = self.backoff(ctx);
            ctx.after(d, Timer::NodeFailKick);
        }
    }

    pub(super) fn nodefail_retry(&mut self, ctx: &mut Ctx<'_>, seq: u32) {
        let Some(p) = self.nodefail_current.as_ref() else {
            return;
        };
        if p.msg.seq != seq {
            return;
        }
        if !self.state.radio_on() {
            return;
        }
        if p.tries < self.params.max_retries {
            self.nodefail_transmit(ctx);
            return;
        }
        ctx.note(Note::Timeout {
            what: "nodefail_ack",
            peer: self.parent,
            slot: None,
        });
        self.nodefail_current = None;
        self.nodefail_schedule_kick(ctx);
    }

    pub(super) fn on_nodefail(&mut self, ctx: &mut Ctx<'_>, src: NodeId, seq: u32, failed: NodeId, reporter: NodeId) {
        let ack = self.message(src, Payload::NodeFailAck { failed, acked: seq });
        ctx.send(ack);
        if !self.nodefail_seen.insert((src, seq)) {
            return;
        }
        if self.is_sink {
            ctx.note(Note::NodeFailReceived { failed, reporter });
            self.sink_handle_failure(ctx, failed);
        } else {
            self.nodefail_queue.push_back((failed, reporter));
            self.nodefail_schedule_kick(ctx);
        }
    }

    pub(super) fn on_nodefail_ack(&mut self, ctx: &mut Ctx<'_>, src: NodeId, acked: u32) {
        if self.parent != Some(src) {
            return;
        }
        if self.nodefail_current.as_ref().is_some_and(|p| p.msg.seq == acked) {
            self.nodefail_current = None;
            self.nodefail_schedule_kick(ctx);
        }
    }
}
