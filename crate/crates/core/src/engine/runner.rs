//! The simulation loop: boots rounds, delivers frames and timers to the
//! node machines, accounts energy, injects failures and faults, and writes
//! the trace.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::rng::{pair_stream, stream, Purpose};
use super::scenario::{Scenario, ValidationError};
use super::snoop::Snoopers;
use super::trace::{EventKind, TraceRecord};
use super::EventQueue;
use crate::analysis::MetricsBundle;
use crate::clock::HardwareClock;
use crate::energy::BatteryState;
use crate::link::{draw_shadow, mean_rssi, packet_delivered, rssi_sample, PairChannel};
use crate::model::{CollectionTree, NodeId, SensorReading};
use crate::protocol::{Ctx, NodeMachine, NodeState, Note, Output, Timer};
use crate::wire::{Message, MsgKind, Payload, BROADCAST};

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Ground-truth trace.
    pub trace: Vec<TraceRecord>,
    /// What the snoopers captured, plus the sink's own records.
    pub snoop: Vec<TraceRecord>,
    /// Counters kept by the engine while running.
    pub metrics: MetricsBundle,
    /// Scenario warnings and run-time anomalies.
    pub warnings: Vec<String>,
    /// Remaining battery charge per node at the end, mAh.
    pub remaining_mah: BTreeMap<NodeId, f64>,
    /// Real time at which the run ended, µs.
    pub end_us: f64,
}

/// Validates a scenario and runs it to completion.
pub fn run(scenario: &Scenario) -> Result<RunOutput, ValidationError> {
    let warnings = scenario.validate()?;
    let mut engine = Engine::new(scenario.clone(), warnings);
    engine.run();
    Ok(engine.finish())
}

#[derive(Debug, Clone)]
enum Event {
    RoundStart { round: u32 },
    Boot { node: usize, round: u32 },
    Timer { node: usize, gen: u64, timer: Timer },
    Deliver { node: usize, msg: Message, rssi: f64 },
    Fail { node: usize, round: u32, slot: u32 },
}

struct NodeRt {
    id: NodeId,
    machine: NodeMachine,
    clock: HardwareClock,
    /// Timer generation; bumped at boot and death to drop stale timers.
    gen: u64,
    rng_proto: ChaCha8Rng,
    rng_noise: ChaCha8Rng,
    rng_jitter: ChaCha8Rng,
    rng_sense: ChaCha8Rng,
    last_account: f64,
    /// Nodes that can possibly hear this one, with their channels.
    receivers: Vec<(usize, PairChannel)>,
}

struct Engine {
    sc: Scenario,
    nodes: Vec<NodeRt>,
    index: BTreeMap<NodeId, usize>,
    sink: usize,
    queue: EventQueue<Event>,
    now: f64,
    trace: Vec<TraceRecord>,
    snoopers: Snoopers,
    snoop: Vec<TraceRecord>,
    metrics: MetricsBundle,
    warnings: Vec<String>,
    rng_boot: ChaCha8Rng,
    /// Latest tree announced by the sink, for SLEEP attribution.
    tree: CollectionTree,
    current_round: u32,
    round_end: Option<f64>,
    injected: BTreeMap<u32, BTreeSet<NodeId>>,
    detected: BTreeMap<u32, BTreeSet<NodeId>>,
}

impl Engine {
    fn new(sc: Scenario, warnings: Vec<String>) -> Self {
        let seed = sc.seed;
        let mut nodes = Vec::with_capacity(sc.nodes.len());
        let mut index = BTreeMap::new();
        for (i, spec) in sc.nodes.iter().enumerate() {
            let id = spec.id;
            index.insert(id, i);
            let is_sink = id == sc.sink;
            let mut rng_clock = stream(seed, id.0, Purpose::Clock);
            let clock = if is_sink {
                HardwareClock::ideal()
            } else {
                let max = sc.clock.max_drift_ppm;
                let drift = spec
                    .drift_ppm
                    .unwrap_or_else(|| if max > 0.0 { rng_clock.gen_range(-max..=max) } else { 0.0 });
                let span = sc.clock.max_boot_offset_ms * 1000.0;
                let offset = spec
                    .boot_offset_us
                    .unwrap_or_else(|| if span > 0.0 { rng_clock.gen_range(0.0..span) } else { 0.0 });
                HardwareClock::new(drift, offset).expect("validated drift")
            };
            let battery = BatteryState::new(sc.energy.rated_capacity_mah, spec.initial_soc, sc.energy.r0)
                .expect("validated battery");
            let machine = NodeMachine::new(id, is_sink, sc.protocol.clone(), sc.energy.curve.clone(), battery);
            nodes.push(NodeRt {
                id,
                machine,
                clock,
                gen: 0,
                rng_proto: stream(seed, id.0, Purpose::Protocol),
                rng_noise: stream(seed, id.0, Purpose::Noise),
                rng_jitter: stream(seed, id.0, Purpose::Jitter),
                rng_sense: stream(seed, id.0, Purpose::Sensing),
                last_account: 0.0,
                receivers: Vec::new(),
            });
        }
        // Receivers whose mean RSSI sits more than five noise deviations
        // below sensitivity can never decode a frame and are pruned.
        let margin = 5.0 * sc.link.noise_sigma;
        for a in 0..sc.nodes.len() {
            for b in (a + 1)..sc.nodes.len() {
                let (sa, sb) = (&sc.nodes[a], &sc.nodes[b]);
                let mut ch = sc.channel(sa, sb);
                let mut rng = pair_stream(seed, sa.id.0, sb.id.0, Purpose::Shadow);
                ch.shadow_offset = draw_shadow(&sc.link, &mut rng);
                if mean_rssi(&sc.link, &ch) + margin >= sc.link.sensitivity {
                    nodes[a].receivers.push((b, ch));
                    nodes[b].receivers.push((a, ch));
                }
            }
        }
        for n in &mut nodes {
            n.receivers.sort_by_key(|&(j, _)| j);
        }
        let sink = index[&sc.sink];
        let snoopers = Snoopers::new(&sc);
        Self {
            nodes,
            index,
            sink,
            queue: EventQueue::new(),
            now: 0.0,
            trace: Vec::new(),
            snoopers,
            snoop: Vec::new(),
            metrics: MetricsBundle::default(),
            warnings,
            rng_boot: stream(seed, u16::MAX, Purpose::Boot),
            tree: CollectionTree::root_only(sc.sink),
            current_round: 0,
            round_end: None,
            injected: BTreeMap::new(),
            detected: BTreeMap::new(),
            sc,
        }
    }

    fn run(&mut self) {
        self.queue.push(0.0, Event::RoundStart { round: 1 });
        while let Some((t, ev)) = self.queue.pop() {
            self.now = t.max(self.now);
            match ev {
                Event::RoundStart { round } => self.round_start(round),
                Event::Boot { node, round } => self.boot(node, round),
                Event::Timer { node, gen, timer } => {
                    if self.nodes[node].gen == gen {
                        self.fire_timer(node, timer);
                    }
                }
                Event::Deliver { node, msg, rssi } => self.deliver(node, msg, rssi),
                Event::Fail { node, round, slot } => self.fail(node, round, slot),
            }
        }
        let end = self.round_end.unwrap_or(self.now).max(self.now);
        self.now = end;
        for i in 0..self.nodes.len() {
            self.account(i);
        }
        self.check_undetected(self.current_round);
    }

    fn finish(self) -> RunOutput {
        RunOutput {
            remaining_mah: self
                .nodes
                .iter()
                .map(|n| (n.id, n.machine.battery.remaining))
                .collect(),
            trace: self.trace,
            snoop: self.snoop,
            metrics: self.metrics,
            warnings: self.warnings,
            end_us: self.now,
        }
    }

    // ======================================================================
    // Rounds, boots, failures

    fn round_start(&mut self, round: u32) {
        if round > 1 {
            self.check_undetected(round - 1);
        }
        self.current_round = round;
        self.round_end = None;
        let alive: Vec<usize> = (0..self.nodes.len())
            .filter(|&i| self.nodes[i].machine.state() != NodeState::Dead)
            .collect();
        let sink_id = self.nodes[self.sink].id;
        let rec = TraceRecord {
            round: Some(round),
            ..TraceRecord::new(self.t(), sink_id, EventKind::Round)
        }
        .with("nodes", alive.len())
        .with("k", self.sc.protocol.ndm_count)
        .with("cap_mah", self.sc.energy.rated_capacity_mah)
        .with("r0", self.sc.energy.r0)
        .with("max_retries", self.sc.protocol.max_retries)
        .with("slots", self.sc.protocol.slots_per_round);
        self.emit(rec);
        self.metrics.round_mut(round);
        for i in alive {
            let delay = if i == self.sink {
                60e6
            } else {
                self.rng_boot.gen_range(0.0..30e6)
            };
            self.queue.push(self.now + delay, Event::Boot { node: i, round });
        }
    }

    fn boot(&mut self, i: usize, round: u32) {
        if self.nodes[i].machine.state() == NodeState::Dead {
            return;
        }
        self.nodes[i].gen += 1;
        self.with_machine(i, None, |m, ctx| m.begin_round(ctx, round));
    }

    fn fail(&mut self, i: usize, round: u32, slot: u32) {
        if self.nodes[i].machine.state() == NodeState::Dead {
            return;
        }
        self.injected.entry(round).or_default().insert(self.nodes[i].id);
        let rec = self.node_record(i, EventKind::Fault).with("kind", "fail").with("at_slot", slot);
        self.emit(rec);
        self.kill(i);
    }

    fn kill(&mut self, i: usize) {
        self.nodes[i].gen += 1;
        self.with_machine(i, None, |m, ctx| m.kill(ctx));
    }

    fn check_undetected(&mut self, round: u32) {
        let injected = self.injected.get(&round).cloned().unwrap_or_default();
        let detected = self.detected.get(&round).cloned().unwrap_or_default();
        for id in injected.difference(&detected) {
            let msg = format!("failure of node {id} in round {round} was not detected");
            let rec = TraceRecord {
                round: Some(round),
                ..TraceRecord::new(self.t(), *id, EventKind::Warn)
            }
            .with("kind", "undetected_failure");
            self.emit(rec);
            self.warnings.push(msg);
        }
    }

    fn on_trigger(&mut self, trigger: f64) {
        let round = self.current_round;
        let dci = self.sc.protocol.dci_us();
        let slots = f64::from(self.sc.protocol.slots_per_round);
        let end = trigger + slots * dci;
        self.round_end = Some(end);
        let failures: Vec<_> = self
            .sc
            .failures
            .iter()
            .filter(|f| f.at_round == round)
            .map(|f| (self.index[&f.node], f.at_slot))
            .collect();
        for (node, slot) in failures {
            let at = (trigger + f64::from(slot) * dci - 1_000.0).max(self.now);
            self.queue.push(at, Event::Fail { node, round, slot });
        }
        if round < self.sc.rounds {
            self.queue.push(end, Event::RoundStart { round: round + 1 });
        }
    }

    // ======================================================================
    // Machine invocation

    fn t(&self) -> u64 {
        self.now.max(0.0).round() as u64
    }

    fn fire_timer(&mut self, i: usize, timer: Timer) {
        let reading = matches!(timer, Timer::SlotStart { .. }).then(|| self.sense(i));
        self.with_machine(i, reading, |m, ctx| m.on_timer(ctx, timer));
    }

    fn with_machine(&mut self, i: usize, reading: Option<SensorReading>, f: impl FnOnce(&mut NodeMachine, &mut Ctx<'_>)) {
        if self.account(i) {
            return;
        }
        let node = &mut self.nodes[i];
        let local = node.clock.local_time(self.now);
        let mut ctx = Ctx::new(local, &mut node.rng_proto);
        ctx.reading = reading;
        f(&mut node.machine, &mut ctx);
        let out = std::mem::take(&mut ctx.out);
        for o in out {
            match o {
                Output::Send { msg, attempt } => self.transmit(i, msg, attempt),
                Output::Timer { at_local, timer } => self.arm(i, at_local, timer),
                Output::Note(n) => self.note(i, n),
            }
        }
    }

    fn arm(&mut self, i: usize, at_local: f64, timer: Timer) {
        let node = &self.nodes[i];
        let mut at = node.clock.real_time(at_local);
        if matches!(timer, Timer::SlotStart { .. }) {
            if let Some(lag) = &self.sc.faults.wake_lag {
                let lagged = lag.nodes.contains(&node.id) || (lag.non_leaves && !node.machine.children().is_empty());
                if lagged {
                    at += lag.lag_ms * 1000.0;
                }
            }
        }
        let gen = node.gen;
        self.queue.push(at.max(self.now), Event::Timer { node: i, gen, timer });
    }

    /// Brings a node's battery up to the current time. Returns true when
    /// the node died of depletion.
    fn account(&mut self, i: usize) -> bool {
        let now = self.now;
        let start_ms = self.sc.start_clock.ms();
        let node = &mut self.nodes[i];
        let dt_ms = (now - node.last_account) / 1000.0;
        let from_ms = node.last_account / 1000.0;
        node.last_account = now;
        let state = node.machine.state();
        if state == NodeState::Dead {
            return true;
        }
        if dt_ms > 0.0 {
            let profile = &self.sc.energy.currents;
            if state.radio_on() {
                node.machine.battery.drain(profile, dt_ms, 0.0, 0, 0.0);
            } else {
                node.machine.battery.drain(profile, 0.0, 0.0, 0, dt_ms);
            }
            self.sc
                .daylight
                .solar_charge(&mut node.machine.battery, start_ms + from_ms, dt_ms);
        }
        if node.machine.battery.is_depleted() {
            let rec = self.node_record(i, EventKind::Warn).with("kind", "depleted");
            self.emit(rec);
            self.kill(i);
            return true;
        }
        false
    }

    fn sense(&mut self, i: usize) -> SensorReading {
        let hour = ((self.sc.start_clock.ms() + self.now / 1000.0) / 3.6e6).rem_euclid(24.0);
        let diurnal = (std::f64::consts::TAU * (hour - 9.0) / 24.0).cos();
        let rng = &mut self.nodes[i].rng_sense;
        let air = 24.0 + 8.0 * diurnal + rng.gen_range(-0.5..0.5);
        SensorReading {
            soil_moisture: (28.0 + rng.gen_range(-2.0..2.0)) as f32,
            soil_temp: (22.0 + 3.0 * diurnal + rng.gen_range(-0.3..0.3)) as f32,
            air_temp: air as f32,
            rel_humidity: (60.0 - 20.0 * diurnal + rng.gen_range(-3.0..3.0)).clamp(0.0, 100.0) as f32,
            battery_mv: 0.0,
        }
    }

    // ======================================================================
    // Radio

    fn transmit(&mut self, i: usize, msg: Message, attempt: u32) {
        let kind = msg.kind();
        let mut rec = self.node_record(i, EventKind::Tx);
        describe(&mut rec, &msg);
        if !matches!(kind, MsgKind::Ndm | MsgKind::Sync | MsgKind::Sleep) {
            rec.push("try", attempt);
        }
        let slot = rec.slot;
        let round = self.nodes[i].machine.round();
        self.count_tx(i, &msg, round, slot, attempt);
        if let Some(captured) = self.snoopers.capture(&self.sc, &self.sc.nodes[i], &rec) {
            self.snoop.push(captured);
        }
        self.trace.push(rec);
        let airtime = self.sc.energy.airtime_ms;
        let profile = self.sc.energy.currents.clone();
        self.nodes[i].machine.battery.drain(&profile, airtime, 1.0, 0, 0.0);

        let unicast = msg.dst != BROADCAST;
        let mut reached = false;
        let receivers = self.nodes[i].receivers.clone();
        for (j, ch) in receivers {
            if unicast && self.nodes[j].id != msg.dst {
                continue;
            }
            reached = true;
            let rssi = rssi_sample(&self.sc.link, &ch, &mut self.nodes[j].rng_noise);
            if packet_delivered(rssi, &self.sc.link) {
                self.queue.push(
                    self.now,
                    Event::Deliver {
                        node: j,
                        msg: msg.clone(),
                        rssi,
                    },
                );
            } else if unicast {
                let mut lost = self.lost_record(j, &msg, "weak");
                lost.set_rssi(rssi);
                self.emit(lost);
            }
        }
        if unicast && !reached {
            if let Some(&j) = self.index.get(&msg.dst) {
                let lost = self.lost_record(j, &msg, "range");
                self.emit(lost);
            }
        }
    }

    fn deliver(&mut self, j: usize, msg: Message, rssi: f64) {
        let unicast = msg.dst != BROADCAST;
        let state = self.nodes[j].machine.state();
        if !state.radio_on() {
            if unicast {
                let reason = if state == NodeState::Dead { "dead" } else { "asleep" };
                let lost = self.lost_record(j, &msg, reason);
                self.emit(lost);
            }
            return;
        }
        if self.dropped_by_fault(j, msg.kind()) {
            let mut rec = self.node_record(j, EventKind::Fault).with("kind", "drop");
            describe(&mut rec, &msg);
            self.emit(rec);
            return;
        }
        let mut rec = self.node_record(j, EventKind::Rx);
        describe(&mut rec, &msg);
        rec.set_rssi(rssi);
        self.emit(rec);
        let jitter = self.sc.clock.mac_jitter_us;
        let node = &mut self.nodes[j];
        let noise = if jitter > 0.0 { node.rng_jitter.gen_range(-jitter..=jitter) } else { 0.0 };
        let rx_local = node.clock.local_time(self.now) + noise;
        self.with_machine(j, None, |m, ctx| m.on_receive(ctx, &msg, rssi, rx_local));
    }

    fn dropped_by_fault(&self, j: usize, kind: MsgKind) -> bool {
        let m = &self.nodes[j].machine;
        let slot = (m.state() == NodeState::ActiveSlot).then(|| m.current_slot()).flatten();
        self.sc.faults.drops.iter().any(|d| {
            d.at == self.nodes[j].id
                && d.kind() == Some(kind)
                && d.round.map_or(true, |r| r == m.round())
                && d.slot.map_or(true, |s| Some(s) == slot)
        })
    }

    fn lost_record(&self, j: usize, msg: &Message, reason: &str) -> TraceRecord {
        let mut rec = self.node_record(j, EventKind::Lost);
        describe(&mut rec, msg);
        rec.push("reason", reason);
        rec
    }

    // ======================================================================
    // Trace and counters

    fn node_record(&self, i: usize, event: EventKind) -> TraceRecord {
        let m = &self.nodes[i].machine;
        let slot = (m.state() == NodeState::ActiveSlot).then(|| m.current_slot()).flatten();
        TraceRecord {
            round: Some(m.round()).filter(|&r| r > 0),
            slot,
            ..TraceRecord::new(self.t(), self.nodes[i].id, event)
        }
    }

    fn emit(&mut self, rec: TraceRecord) {
        if rec.event.is_sink_record() {
            self.snoop.push(rec.clone());
        }
        self.trace.push(rec);
    }

    fn count_tx(&mut self, i: usize, msg: &Message, round: u32, slot: Option<u32>, attempt: u32) {
        let kind = msg.kind();
        let sender = self.nodes[i].id;
        let rm = self.metrics.round_mut(round);
        *rm.tx_by_kind.entry(kind).or_insert(0) += 1;
        match kind {
            MsgKind::Data => {
                let c = rm.census.entry(sender).or_default();
                c.data_sent += 1;
                if let Some(s) = slot {
                    let e = c.max_tries.entry(s).or_insert(0);
                    *e = (*e).max(attempt);
                }
            }
            MsgKind::DataAck => {
                rm.census.entry(msg.dst).or_default().acks_received += 1;
            }
            MsgKind::Sleep => {
                rm.census.entry(sender).or_default().sleeps_sent += 1;
                for &c in self.tree.children_of(sender) {
                    rm.census.entry(c).or_default().sleeps_received += 1;
                }
            }
            _ => {}
        }
    }

    fn note(&mut self, i: usize, note: Note) {
        let base = self.node_record(i, EventKind::Warn);
        let round = self.nodes[i].machine.round();
        let recs: Vec<TraceRecord> = match note {
            Note::State(s) => vec![TraceRecord {
                event: EventKind::State,
                ..base
            }
            .with("state", s)],
            Note::Timeout { what, peer, slot } => vec![TraceRecord {
                event: EventKind::Timeout,
                dst: peer,
                slot: slot.or(base.slot),
                ..base
            }
            .with("what", what)],
            Note::Neighbours(list) => list
                .into_iter()
                .map(|(peer, avg, w)| {
                    let mut r = TraceRecord {
                        event: EventKind::Neighbours,
                        dst: Some(peer),
                        ..base.clone()
                    }
                    .with("w", format!("{w:.2}"));
                    r.set_rssi(avg);
                    r
                })
                .collect(),
            Note::Isolated => vec![base.with("kind", "isolated")],
            Note::QueueDrop { origin } => vec![base.with("kind", "queue_drop").with("origin", origin)],
            Note::Graph { epoch, graph } => graph
                .edges()
                .map(|(u, v, w)| {
                    TraceRecord {
                        event: EventKind::Edge,
                        src: Some(u),
                        dst: Some(v),
                        ..base.clone()
                    }
                    .with("w", format!("{w:.2}"))
                    .with("epoch", epoch)
                })
                .collect(),
            Note::Tree { epoch, tree, unreachable } => {
                let mut out = vec![TraceRecord {
                    event: EventKind::Tree,
                    src: Some(tree.root),
                    ..base.clone()
                }
                .with("epoch", epoch)
                .with("root", 1)];
                for (c, p) in tree.parent_pairs() {
                    out.push(
                        TraceRecord {
                            event: EventKind::Tree,
                            src: Some(c),
                            dst: Some(p),
                            ..base.clone()
                        }
                        .with("epoch", epoch),
                    );
                }
                for u in unreachable {
                    out.push(base.clone().with("kind", "unreachable").with("node", u));
                }
                let rm = self.metrics.round_mut(round);
                for v in tree.vertices() {
                    rm.yields.entry(v).or_insert(0);
                }
                self.tree = tree;
                out
            }
            Note::Reading { slot, origin, reading } => {
                *self.metrics.round_mut(round).yields.entry(origin).or_insert(0) += 1;
                vec![TraceRecord {
                    event: EventKind::Reading,
                    src: Some(origin),
                    slot: Some(slot),
                    ..base
                }
                .with("sm", format!("{:.2}", reading.soil_moisture))
                .with("st", format!("{:.2}", reading.soil_temp))
                .with("at", format!("{:.2}", reading.air_temp))
                .with("rh", format!("{:.2}", reading.rel_humidity))
                .with("mv", format!("{:.3}", reading.battery_mv))]
            }
            Note::Collect { slot, received, expected } => vec![TraceRecord {
                event: EventKind::Collect,
                slot: Some(slot),
                ..base
            }
            .with("received", received)
            .with("expected", expected)],
            Note::NodeFailDetect { failed, slot, via } => {
                self.detected.entry(round).or_default().insert(failed);
                vec![TraceRecord {
                    event: EventKind::NodeFail,
                    slot: slot.or(base.slot),
                    ..base
                }
                .with("stage", "detect")
                .with("failed", failed)
                .with("via", via)]
            }
            Note::NodeFailReceived { failed, reporter } => vec![TraceRecord {
                event: EventKind::NodeFail,
                ..base
            }
            .with("stage", "sink")
            .with("failed", failed)
            .with("reporter", reporter)],
            Note::Trigger { global_us } => {
                self.on_trigger(global_us);
                vec![TraceRecord {
                    event: EventKind::Trigger,
                    ..base
                }
                .with("at", format!("{global_us:.0}"))]
            }
            Note::Wake { slot, global_us } => {
                let profile = self.sc.energy.currents.clone();
                let node = &mut self.nodes[i];
                node.machine.battery.drain(&profile, 0.0, 0.0, 1, 0.0);
                let err = self.now - global_us;
                vec![TraceRecord {
                    event: EventKind::Wake,
                    slot: Some(slot),
                    ..base
                }
                .with("err_us", format!("{err:.3}"))
                .with("rem_mah", format!("{:.4}", node.machine.battery.remaining))]
            }
            Note::Warn(text) => vec![base.with("text", text)],
        };
        for r in recs {
            self.emit(r);
        }
    }
}

/// Fills the message columns and a short payload summary.
fn describe(rec: &mut TraceRecord, msg: &Message) {
    rec.msg = Some(msg.kind());
    rec.src = Some(msg.src);
    rec.dst = Some(msg.dst);
    rec.seq = Some(msg.seq);
    match &msg.payload {
        Payload::Ndm { index, .. } => rec.push("index", index),
        Payload::Nbm(p) => {
            rec.push("origin", p.origin);
            rec.push("nb", p.neighbours.len());
        }
        Payload::NbmAck { origin } => rec.push("origin", origin),
        Payload::Cdm { epoch, .. } | Payload::CdmAck { epoch } => rec.push("epoch", epoch),
        Payload::Sync { trigger } => {
            if let Some(t) = trigger {
                rec.push("trigger", t);
            }
        }
        Payload::Synced => {}
        Payload::Data { slot, more, readings } => {
            rec.push("dslot", slot);
            rec.push("n", readings.len());
            rec.push("more", u8::from(*more));
            let origins: Vec<String> = readings.iter().map(|(o, _)| o.to_string()).collect();
            rec.push("origins", origins.join(","));
        }
        Payload::DataAck { slot, acked } => {
            rec.push("dslot", slot);
            rec.push("acked", acked);
        }
        Payload::Sleep { slot } => rec.push("dslot", slot),
        Payload::NodeFail { failed, reporter } => {
            rec.push("failed", failed);
            rec.push("reporter", reporter);
        }
        Payload::NodeFailAck { failed, acked } => {
            rec.push("failed", failed);
            rec.push("acked", acked);
        }
    }
    if let Some(ts) = msg.mac_timestamp {
        rec.push("ts", ts);
    }
}
