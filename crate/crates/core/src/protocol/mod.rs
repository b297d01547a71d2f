//! The per-node protocol state machine.
//!
//! A [`NodeMachine`] is advanced only by the inputs an engine delivers:
//! round start, receptions and its own timers. Every input runs against a
//! [`Ctx`] holding the node's local clock reading and its random stream;
//! the machine answers with [`Output`]s (frames to transmit, timers to arm
//! on the local clock, and notes for the trace).
//!
//! Phases per round: neighbour discovery, NBM flooding, tree
//! distribution (CDM), time synchronization and the data-collection slots.
//! The sink runs the same machine with the graph assembly, tree building
//! and failure repair of [`SinkState`] attached.

mod bounds;
mod discovery;
mod flood;
mod params;
mod sink;
mod slot;
mod sync;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clock::{SkewEstimate, SyncTable};
use crate::energy::{BatteryState, SocOcvCurve};
use crate::model::{CollectionTree, LinkRecord, NetworkGraph, NodeId, SensorReading};
use crate::wire::{Message, NbmPayload, Payload, BROADCAST};

pub use bounds::{message_bound, PhaseBounds};
pub use discovery::{finalize_neighbours, Admitted};
pub use params::{ParamError, ProtocolParams};
pub use sink::{assemble_graph, SinkState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeState {
    Discovery,
    Flooding,
    AwaitCdm,
    Syncing,
    ActiveSlot,
    Sleeping,
    Dead,
}

impl NodeState {
    pub const ALL: [NodeState; 7] = [
        NodeState::Discovery,
        NodeState::Flooding,
        NodeState::AwaitCdm,
        NodeState::Syncing,
        NodeState::ActiveSlot,
        NodeState::Sleeping,
        NodeState::Dead,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NodeState::Discovery => "DISCOVERY",
            NodeState::Flooding => "FLOODING",
            NodeState::AwaitCdm => "AWAIT_CDM",
            NodeState::Syncing => "SYNCING",
            NodeState::ActiveSlot => "ACTIVE_SLOT",
            NodeState::Sleeping => "SLEEPING",
            NodeState::Dead => "DEAD",
        }
    }

    pub fn radio_on(self) -> bool {
        !matches!(self, NodeState::Sleeping | NodeState::Dead)
    }
}

impl fmt::Display for NodeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NodeState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown node state {s:?}"))
    }
}

/// Timers a machine arms on its own clock.
#[derive(Debug, Clone, PartialEq)]
pub enum Timer {
    NdmSend { index: u16 },
    DiscoveryEnd,
    DiscoveryGiveUp,
    FloodKick,
    FloodRetry { seq: u32 },
    FloodQuiet,
    CdmRetry { child: NodeId, seq: u32 },
    SyncStart,
    SyncTick,
    SyncFallback,
    /// Start of a collection slot; `global_us` is the intended global time
    /// and `alarm` the arming generation (a re-armed alarm supersedes older ones).
    SlotStart { slot: u32, global_us: f64, alarm: u32 },
    SlotSend { slot: u32 },
    DataKick { slot: u32 },
    DataRetry { seq: u32 },
    SleepTimeout { slot: u32 },
    NodeFailKick,
    NodeFailRetry { seq: u32 },
    RebuildSettle { epoch: u32 },
}

/// Observations a machine reports for the trace.
#[derive(Debug, Clone, PartialEq)]
pub enum Note {
    State(NodeState),
    Timeout { what: &'static str, peer: Option<NodeId>, slot: Option<u32> },
    /// Admitted neighbours as `(peer, avg_rssi, weight)`.
    Neighbours(Vec<(NodeId, f64, f64)>),
    Isolated,
    QueueDrop { origin: NodeId },
    Graph { epoch: u32, graph: NetworkGraph },
    Tree { epoch: u32, tree: CollectionTree, unreachable: Vec<NodeId> },
    Reading { slot: u32, origin: NodeId, reading: SensorReading },
    Collect { slot: u32, received: usize, expected: usize },
    NodeFailDetect { failed: NodeId, slot: Option<u32>, via: &'static str },
    NodeFailReceived { failed: NodeId, reporter: NodeId },
    Trigger { global_us: f64 },
    /// A slot alarm fired; `global_us` is the instant it was aimed at.
    Wake { slot: u32, global_us: f64 },
    Warn(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Output {
    /// A frame to transmit; `attempt` counts transmissions of the same frame.
    Send { msg: Message, attempt: u32 },
    Timer { at_local: f64, timer: Timer },
    Note(Note),
}

/// Execution context of one input.
pub struct Ctx<'a> {
    /// Local clock reading, µs.
    pub now: f64,
    pub rng: &'a mut ChaCha8Rng,
    /// Sensor values sampled for a slot start.
    pub reading: Option<SensorReading>,
    pub out: Vec<Output>,
}

impl<'a> Ctx<'a> {
    pub fn new(now: f64, rng: &'a mut ChaCha8Rng) -> Self {
        Self {
            now,
            rng,
            reading: None,
            out: Vec::new(),
        }
    }

    fn send(&mut self, msg: Message) {
        self.send_try(msg, 1);
    }

    fn send_try(&mut self, msg: Message, attempt: u32) {
        self.out.push(Output::Send { msg, attempt });
    }

    fn at(&mut self, at_local: f64, timer: Timer) {
        self.out.push(Output::Timer { at_local, timer });
    }

    fn after(&mut self, delay_us: f64, timer: Timer) {
        let at = self.now + delay_us.max(0.0);
        self.at(at, timer);
    }

    fn note(&mut self, note: Note) {
        self.out.push(Output::Note(note));
    }
}

/// A frame awaiting acknowledgement.
#[derive(Debug, Clone)]
struct Pending {
    msg: Message,
    tries: u32,
}

#[derive(Debug, Clone, Default)]
struct DiscoveryState {
    started: bool,
    finalized: bool,
}

#[derive(Debug, Clone)]
struct FloodInFlight {
    msg: Message,
    tries: u32,
    awaiting: BTreeSet<NodeId>,
}

#[derive(Debug, Clone, Default)]
struct FloodState {
    queue: VecDeque<NbmPayload>,
    seen: BTreeSet<NodeId>,
    inflight: Option<FloodInFlight>,
    kick_pending: bool,
    last_heard: f64,
    finalized_at: f64,
}

#[derive(Debug, Clone, Default)]
struct SyncState {
    synced: bool,
    sent_synced: bool,
    children_synced: BTreeSet<NodeId>,
    trigger: Option<f64>,
    ticking: bool,
}

#[derive(Debug, Clone, Default)]
struct SlotState {
    index: u32,
    buffer: Vec<(NodeId, SensorReading)>,
    expected: BTreeSet<NodeId>,
    complete: BTreeSet<NodeId>,
    seen: BTreeSet<(NodeId, u32)>,
    forwarded: bool,
    outgoing: VecDeque<Vec<(NodeId, SensorReading)>>,
    current: Option<Pending>,
    kick_pending: bool,
}

/// One node's protocol state.
#[derive(Debug, Clone)]
pub struct NodeMachine {
    pub id: NodeId,
    pub is_sink: bool,
    params: ProtocolParams,
    curve: SocOcvCurve,
    state: NodeState,
    seq: u32,
    round: u32,
    pub battery: BatteryState,
    neighbour_table: BTreeMap<NodeId, LinkRecord>,
    admitted: Vec<(NodeId, f64)>,
    discovery: DiscoveryState,
    flood: FloodState,
    epoch: u32,
    parent: Option<NodeId>,
    children: Vec<NodeId>,
    height: usize,
    cdm_out: BTreeMap<NodeId, Pending>,
    sync_table: SyncTable,
    estimate: SkewEstimate,
    sync: SyncState,
    slot: SlotState,
    miss_counts: BTreeMap<NodeId, u32>,
    locally_failed: BTreeSet<NodeId>,
    nodefail_queue: VecDeque<(NodeId, NodeId)>,
    nodefail_current: Option<Pending>,
    nodefail_kick_pending: bool,
    nodefail_seen: BTreeSet<(NodeId, u32)>,
    alarm_gen: u32,
    sink: Option<SinkState>,
}

impl NodeMachine {
    pub fn new(id: NodeId, is_sink: bool, params: ProtocolParams, curve: SocOcvCurve, battery: BatteryState) -> Self {
        let table = SyncTable::new(params.sync_table_capacity);
        Self {
            id,
            is_sink,
            curve,
            state: NodeState::Sleeping,
            seq: 0,
            round: 0,
            battery,
            neighbour_table: BTreeMap::new(),
            admitted: Vec::new(),
            discovery: DiscoveryState::default(),
            flood: FloodState::default(),
            epoch: 0,
            parent: None,
            children: Vec::new(),
            height: 0,
            cdm_out: BTreeMap::new(),
            sync_table: table,
            estimate: SkewEstimate::identity(),
            sync: SyncState::default(),
            slot: SlotState::default(),
            miss_counts: BTreeMap::new(),
            locally_failed: BTreeSet::new(),
            nodefail_queue: VecDeque::new(),
            nodefail_current: None,
            nodefail_kick_pending: false,
            nodefail_seen: BTreeSet::new(),
            alarm_gen: 0,
            sink: is_sink.then(|| SinkState::new(id)),
            params,
        }
    }

    // -- accessors ---------------------------------------------------------

    pub fn state(&self) -> NodeState {
        self.state
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn parent(&self) -> Option<NodeId> {
        self.parent
    }

    pub fn children(&self) -> &[NodeId] {
        &self.children
    }

    pub fn epoch(&self) -> u32 {
        self.epoch
    }

    pub fn neighbour_table(&self) -> impl Iterator<Item = &LinkRecord> {
        self.neighbour_table.values()
    }

    pub fn admitted(&self) -> &[(NodeId, f64)] {
        &self.admitted
    }

    pub fn seen_origins(&self) -> &BTreeSet<NodeId> {
        &self.flood.seen
    }

    pub fn queue_len(&self) -> usize {
        self.flood.queue.len()
    }

    pub fn sync_table(&self) -> &SyncTable {
        &self.sync_table
    }

    pub fn estimate(&self) -> SkewEstimate {
        self.estimate
    }

    pub fn trigger(&self) -> Option<f64> {
        self.sync.trigger
    }

    pub fn is_synced(&self) -> bool {
        self.sync.synced
    }

    pub fn current_slot(&self) -> Option<u32> {
        (self.sync.trigger.is_some() && self.state != NodeState::Dead).then_some(self.slot.index)
    }

    pub fn miss_counts(&self) -> &BTreeMap<NodeId, u32> {
        &self.miss_counts
    }

    pub fn sink_state(&self) -> Option<&SinkState> {
        self.sink.as_ref()
    }

    /// Estimated global time at a local reading. The sink's clock defines
    /// global time.
    pub fn global_at(&self, local: f64) -> f64 {
        if self.is_sink {
            local
        } else {
            self.estimate.global_time_estimate(local)
        }
    }

    pub fn local_for_global(&self, global: f64) -> f64 {
        if self.is_sink {
            global
        } else {
            self.estimate.local_alarm(global)
        }
    }

    // -- inputs ------------------------------------------------------------

    /// Resets per-round state and enters discovery. Battery, clock history
    /// and sequence numbers carry over.
    pub fn begin_round(&mut self, ctx: &mut Ctx<'_>, round: u32) {
        if self.state == NodeState::Dead {
            return;
        }
        self.round = round;
        self.neighbour_table.clear();
        self.admitted.clear();
        self.discovery = DiscoveryState::default();
        self.flood = FloodState::default();
        self.epoch = 0;
        self.parent = None;
        self.children.clear();
        self.height = 0;
        self.cdm_out.clear();
        self.sync = SyncState::default();
        self.slot = SlotState::default();
        self.miss_counts.clear();
        self.locally_failed.clear();
        self.nodefail_queue.clear();
        self.nodefail_current = None;
        self.nodefail_kick_pending = false;
        self.nodefail_seen.clear();
        if let Some(s) = self.sink.as_mut() {
            s.reset(round);
        }
        self.set_state(ctx, NodeState::Discovery);
        self.start_discovery(ctx);
    }

    /// Permanently switches the node off.
    pub fn kill(&mut self, ctx: &mut Ctx<'_>) {
        if self.state != NodeState::Dead {
            self.set_state(ctx, NodeState::Dead);
        }
    }

    pub fn on_receive(&mut self, ctx: &mut Ctx<'_>, msg: &Message, rssi: f64, rx_local: f64) {
        if !self.state.radio_on() {
            return;
        }
        if msg.dst != BROADCAST && msg.dst != self.id {
            return;
        }
        match &msg.payload {
            Payload::Ndm { total, capacity, .. } => self.on_ndm(ctx, msg.src, rssi, *total, *capacity),
            Payload::Nbm(p) => self.on_nbm(ctx, msg.src, p),
            Payload::NbmAck { origin } => self.on_nbm_ack(ctx, msg.src, *origin),
            Payload::Cdm { epoch, parents } => self.on_cdm(ctx, msg.src, *epoch, parents),
            Payload::CdmAck { epoch } => self.on_cdm_ack(ctx, msg.src, *epoch),
            Payload::Sync { trigger } => {
                if let Some(ts) = msg.mac_timestamp {
                    self.on_sync(ctx, msg.src, ts as f64, *trigger, rx_local);
                }
            }
            Payload::Synced => self.on_synced(ctx, msg.src),
            Payload::Data { slot, more, readings } => self.on_data(ctx, msg.src, msg.seq, *slot, *more, readings),
            Payload::DataAck { slot, acked } => self.on_data_ack(ctx, msg.src, *slot, *acked),
            Payload::Sleep { slot } => {
                if let Some(ts) = msg.mac_timestamp {
                    self.on_sleep(ctx, msg.src, *slot, ts as f64, rx_local);
                }
            }
            Payload::NodeFail { failed, reporter } => self.on_nodefail(ctx, msg.src, msg.seq, *failed, *reporter),
            Payload::NodeFailAck { acked, .. } => self.on_nodefail_ack(ctx, msg.src, *acked),
        }
    }

    pub fn on_timer(&mut self, ctx: &mut Ctx<'_>, timer: Timer) {
        if self.state == NodeState::Dead {
            return;
        }
        match timer {
            Timer::NdmSend { index } => self.send_ndm(ctx, index),
            Timer::DiscoveryEnd => self.finalize(ctx),
            Timer::DiscoveryGiveUp => {
                if self.state == NodeState::Discovery && !self.discovery.started {
                    ctx.note(Note::Timeout {
                        what: "discovery",
                        peer: None,
                        slot: None,
                    });
                    self.finalize(ctx);
                }
            }
            Timer::FloodKick => {
                self.flood.kick_pending = false;
                self.flood_pump(ctx);
            }
            Timer::FloodRetry { seq } => self.flood_retry(ctx, seq),
            Timer::FloodQuiet => self.flood_quiet(ctx),
            Timer::CdmRetry { child, seq } => self.cdm_retry(ctx, child, seq),
            Timer::SyncStart => self.sink_sync_start(ctx),
            Timer::SyncTick => self.sync_tick(ctx),
            Timer::SyncFallback => self.sink_sync_fallback(ctx),
            Timer::SlotStart { slot, global_us, alarm } => {
                if alarm == self.alarm_gen {
                    self.slot_start(ctx, slot, global_us);
                }
            }
            Timer::SlotSend { slot } => self.slot_send(ctx, slot),
            Timer::DataKick { slot } => {
                if slot == self.slot.index {
                    self.slot.kick_pending = false;
                    self.data_pump(ctx);
                }
            }
            Timer::DataRetry { seq } => self.data_retry(ctx, seq),
            Timer::SleepTimeout { slot } => self.sleep_timeout(ctx, slot),
            Timer::NodeFailKick => {
                self.nodefail_kick_pending = false;
                self.nodefail_pump(ctx);
            }
            Timer::NodeFailRetry { seq } => self.nodefail_retry(ctx, seq),
            Timer::RebuildSettle { epoch } => self.sink_settle_done(ctx, epoch),
        }
    }

    // -- helpers -----------------------------------------------------------

    fn set_state(&mut self, ctx: &mut Ctx<'_>, state: NodeState) {
        if self.state != state {
            self.state = state;
            ctx.note(Note::State(state));
        }
    }

    fn next_seq(&mut self) -> u32 {
        self.seq = self.seq.wrapping_add(1);
        self.seq
    }

    fn message(&mut self, dst: NodeId, payload: Payload) -> Message {
        Message {
            src: self.id,
            dst,
            seq: self.next_seq(),
            mac_timestamp: None,
            payload,
        }
    }

    fn backoff(&self, ctx: &mut Ctx<'_>) -> f64 {
        let lo = self.params.backoff_min_ms * 1000.0;
        let hi = self.params.backoff_max_ms * 1000.0;
        if hi > lo {
            ctx.rng.gen_range(lo..=hi)
        } else {
            lo
        }
    }

    fn ack_wait(&self, ctx: &mut Ctx<'_>) -> f64 {
        self.params.ack_timeout_ms * 1000.0 + self.backoff(ctx)
    }

    /// Children this node still expects to hear from.
    fn live_children(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.children.iter().copied().filter(|c| !self.locally_failed.contains(c))
    }

    fn is_leaf(&self) -> bool {
        self.live_children().next().is_none()
    }

    fn capacity(&self) -> f64 {
        self.battery.remaining
    }

    fn sensor_reading(&self, ctx: &Ctx<'_>) -> SensorReading {
        let mut r = ctx.reading.unwrap_or(SensorReading {
            soil_moisture: 0.0,
            soil_temp: 0.0,
            air_temp: 0.0,
            rel_humidity: 0.0,
            battery_mv: 0.0,
        });
        r.battery_mv = self.battery.reported_voltage(&self.curve) * 1000.0;
        r
    }
}
