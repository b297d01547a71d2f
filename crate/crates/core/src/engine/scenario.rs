//! Scenario files: deployment, radio, protocol and energy settings, the
//! failures and faults to inject, and the snoopers that listen in.
//!
//! Scenarios are TOML documents carrying a `schema_version`. Every table
//! except `nodes` is optional and falls back to the defaults.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clock::MAX_DRIFT_PPM;
use crate::energy::{CurrentProfile, SocOcvCurve, SolarParams, DEFAULT_CAPACITY_MAH, DEFAULT_R0};
use crate::link::{mean_rssi, LinkModelParams, PairChannel};
use crate::model::NodeId;
use crate::protocol::ProtocolParams;
use crate::wire::MsgKind;

pub const SCHEMA_VERSION: u32 = 1;

/// One offending field of a scenario.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub field: String,
    pub reason: String,
}

/// Every problem found in a scenario, reported together.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ValidationError {
    pub issues: Vec<Issue>,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid scenario:")?;
        for i in &self.issues {
            write!(f, "\n  {}: {}", i.field, i.reason)?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("scenario syntax: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: NodeId,
    /// Position, metres.
    pub x: f64,
    pub y: f64,
    #[serde(default = "full")]
    pub initial_soc: f64,
    /// Clock drift; drawn from the clock settings when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift_ppm: Option<f64>,
    /// Local clock reading at simulation start, µs; drawn when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boot_offset_us: Option<f64>,
}

fn full() -> f64 {
    1.0
}

/// Extra attenuation on one pair of nodes, in both directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub a: NodeId,
    pub b: NodeId,
    pub penalty_db: f64,
}

/// A node switched off just before a slot of a round (rounds count from 1,
/// slots from 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureSpec {
    pub node: NodeId,
    pub at_round: u32,
    pub at_slot: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnooperSpec {
    pub x: f64,
    pub y: f64,
    pub capture_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyConfig {
    pub rated_capacity_mah: f64,
    pub r0: f64,
    pub currents: CurrentProfile,
    pub curve: SocOcvCurve,
    /// Radio-on time charged per transmitted frame, ms.
    pub airtime_ms: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            rated_capacity_mah: DEFAULT_CAPACITY_MAH,
            r0: DEFAULT_R0,
            currents: CurrentProfile::default(),
            curve: SocOcvCurve::default(),
            airtime_ms: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClockConfig {
    /// Drifts are drawn uniformly from `±max_drift_ppm`.
    pub max_drift_ppm: f64,
    /// Boot offsets are drawn uniformly from `[0, max_boot_offset_ms)`.
    pub max_boot_offset_ms: f64,
    /// Receive timestamps carry uniform jitter of `±mac_jitter_us`.
    pub mac_jitter_us: f64,
}

impl Default for ClockConfig {
    fn default() -> Self {
        Self {
            max_drift_ppm: 40.0,
            max_boot_offset_ms: 1_000.0,
            mac_jitter_us: 30.0,
        }
    }
}

/// Late slot wake-ups, used to reproduce synchronization error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WakeLag {
    pub lag_ms: f64,
    /// Apply to every node with children at the time the alarm is armed.
    #[serde(default)]
    pub non_leaves: bool,
    #[serde(default)]
    pub nodes: Vec<NodeId>,
}

/// Silently discards receptions of one message kind at one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DropRule {
    /// Message kind name as written in traces, e.g. `DATA_ACK`.
    pub msg: String,
    /// Receiving node.
    pub at: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub round: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<u32>,
}

impl DropRule {
    pub fn kind(&self) -> Option<MsgKind> {
        self.msg.parse().ok()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Faults {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wake_lag: Option<WakeLag>,
    pub drops: Vec<DropRule>,
}

/// Time of day, seconds after midnight, written `HH:MM` or `HH:MM:SS`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TimeOfDay(pub u32);

impl FromStr for TimeOfDay {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        if !(2..=3).contains(&parts.len()) {
            return Err(format!("time of day {s:?} is not HH:MM[:SS]"));
        }
        let nums: Result<Vec<u32>, _> = parts.iter().map(|p| p.parse::<u32>()).collect();
        let nums = nums.map_err(|_| format!("time of day {s:?} is not numeric"))?;
        let (h, m, sec) = (nums[0], nums[1], nums.get(2).copied().unwrap_or(0));
        if h >= 24 || m >= 60 || sec >= 60 {
            return Err(format!("time of day {s:?} out of range"));
        }
        Ok(TimeOfDay(h * 3600 + m * 60 + sec))
    }
}

impl TryFrom<String> for TimeOfDay {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<TimeOfDay> for String {
    fn from(t: TimeOfDay) -> Self {
        t.to_string()
    }
}

impl fmt::Display for TimeOfDay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.0;
        if s % 60 == 0 {
            write!(f, "{:02}:{:02}", s / 3600, (s / 60) % 60)
        } else {
            write!(f, "{:02}:{:02}:{:02}", s / 3600, (s / 60) % 60, s % 60)
        }
    }
}

impl TimeOfDay {
    pub fn ms(self) -> f64 {
        f64::from(self.0) * 1000.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub seed: u64,
    pub rounds: u32,
    pub sink: NodeId,
    #[serde(default = "default_start")]
    pub start_clock: TimeOfDay,
    #[serde(default)]
    pub daylight: SolarParams,
    #[serde(default)]
    pub link: LinkModelParams,
    #[serde(default)]
    pub protocol: ProtocolParams,
    #[serde(default)]
    pub energy: EnergyConfig,
    #[serde(default)]
    pub clock: ClockConfig,
    #[serde(default)]
    pub faults: Faults,
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub failures: Vec<FailureSpec>,
    #[serde(default)]
    pub snoopers: Vec<SnooperSpec>,
}

fn default_start() -> TimeOfDay {
    TimeOfDay(18 * 3600 + 30 * 60)
}

impl Scenario {
    /// Parses and validates a scenario document.
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Line-of-sight channel between two nodes, including obstacles.
    pub fn channel(&self, a: &NodeSpec, b: &NodeSpec) -> PairChannel {
        let mut ch = PairChannel::line_of_sight(((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt());
        for o in &self.obstacles {
            if (o.a == a.id && o.b == b.id) || (o.a == b.id && o.b == a.id) {
                ch.obstacle_penalty += o.penalty_db;
            }
        }
        ch
    }

    /// Checks every field and returns the warnings that do not make the
    /// scenario unusable.
    pub fn validate(&self) -> Result<Vec<String>, ValidationError> {
        let mut issues = Vec::new();
        let mut warnings = Vec::new();
        let mut bad = |field: &str, reason: String| {
            issues.push(Issue {
                field: field.to_string(),
                reason,
            })
        };
        if self.schema_version != SCHEMA_VERSION {
            bad(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            );
        }
        if self.rounds == 0 {
            bad("rounds", "must be at least 1".into());
        }
        if self.nodes.is_empty() {
            bad("nodes", "at least one node is required".into());
        }
        let mut ids = BTreeSet::new();
        let mut positions = BTreeSet::new();
        for (i, n) in self.nodes.iter().enumerate() {
            let f = |name: &str| format!("nodes[{i}].{name}");
            if n.id == crate::wire::BROADCAST {
                bad(&f("id"), "reserved for broadcast".into());
            }
            if !ids.insert(n.id) {
                bad(&f("id"), format!("duplicate id {}", n.id));
            }
            if !(n.x.is_finite() && n.y.is_finite()) {
                bad(&f("x"), "position must be finite".into());
            } else if !positions.insert((n.x.to_bits(), n.y.to_bits())) {
                bad(&f("x"), format!("position ({}, {}) already taken", n.x, n.y));
            }
            if !(0.0..=1.0).contains(&n.initial_soc) {
                bad(&f("initial_soc"), format!("{} is outside [0, 1]", n.initial_soc));
            }
            if let Some(d) = n.drift_ppm {
                if !(d.abs() <= MAX_DRIFT_PPM) {
                    bad(&f("drift_ppm"), format!("{d} exceeds ±{MAX_DRIFT_PPM}"));
                }
            }
            if let Some(o) = n.boot_offset_us {
                if !(o.is_finite() && o >= 0.0) {
                    bad(&f("boot_offset_us"), "must be finite and non-negative".into());
                }
            }
        }
        if !ids.contains(&self.sink) {
            bad("sink", format!("node {} is not in nodes", self.sink));
        }
        if let Err(e) = self.link.validate() {
            bad("link", e.to_string());
        }
        if let Err(e) = self.protocol.validate() {
            bad(&format!("protocol.{}", e.field), e.reason);
        }
        if self.link.rssi_threshold != self.protocol.rssi_threshold {
            bad(
                "protocol.rssi_threshold",
                format!("differs from link.rssi_threshold ({})", self.link.rssi_threshold),
            );
        }
        if let Err(e) = self.daylight.validate() {
            bad("daylight", e.to_string());
        }
        if let Err(e) = self.energy.currents.validate() {
            bad("energy.currents", e.to_string());
        }
        if !(self.energy.rated_capacity_mah > 0.0 && self.energy.rated_capacity_mah.is_finite()) {
            bad("energy.rated_capacity_mah", "must be positive".into());
        }
        if !(self.energy.r0 >= 0.0 && self.energy.r0.is_finite()) {
            bad("energy.r0", "must be non-negative".into());
        }
        if !(self.energy.airtime_ms >= 0.0 && self.energy.airtime_ms.is_finite()) {
            bad("energy.airtime_ms", "must be non-negative".into());
        }
        let c = &self.clock;
        if !(c.max_drift_ppm >= 0.0 && c.max_drift_ppm <= MAX_DRIFT_PPM) {
            bad("clock.max_drift_ppm", format!("must be in [0, {MAX_DRIFT_PPM}]"));
        }
        if !(c.max_boot_offset_ms >= 0.0 && c.max_boot_offset_ms.is_finite()) {
            bad("clock.max_boot_offset_ms", "must be non-negative".into());
        }
        if !(c.mac_jitter_us >= 0.0 && c.mac_jitter_us.is_finite()) {
            bad("clock.mac_jitter_us", "must be non-negative".into());
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            if !ids.contains(&o.a) || !ids.contains(&o.b) {
                bad(&format!("obstacles[{i}]"), "refers to an unknown node".into());
            }
            if !(o.penalty_db >= 0.0 && o.penalty_db.is_finite()) {
                bad(&format!("obstacles[{i}].penalty_db"), "must be non-negative".into());
            }
        }
        let slots = self.protocol.slots_per_round;
        for (i, fl) in self.failures.iter().enumerate() {
            let f = |name: &str| format!("failures[{i}].{name}");
            if !ids.contains(&fl.node) {
                bad(&f("node"), format!("unknown node {}", fl.node));
            }
            if fl.node == self.sink {
                bad(&f("node"), "the sink cannot fail".into());
            }
            if fl.at_round == 0 || fl.at_round > self.rounds {
                bad(&f("at_round"), format!("must be in 1..={}", self.rounds));
            }
            if fl.at_slot >= slots {
                bad(&f("at_slot"), format!("must be below slots_per_round ({slots})"));
            } else if slots - fl.at_slot < self.protocol.failure_miss_threshold {
                warnings.push(format!(
                    "failure of node {} at slot {} leaves too few slots to be detected",
                    fl.node, fl.at_slot
                ));
            }
        }
        for (i, s) in self.snoopers.iter().enumerate() {
            if !(s.x.is_finite() && s.y.is_finite()) {
                bad(&format!("snoopers[{i}]"), "position must be finite".into());
            }
            if !(s.capture_radius > 0.0 && s.capture_radius.is_finite()) {
                bad(&format!("snoopers[{i}].capture_radius"), "must be positive".into());
            }
        }
        if let Some(w) = &self.faults.wake_lag {
            if !(w.lag_ms >= 0.0 && w.lag_ms.is_finite()) {
                bad("faults.wake_lag.lag_ms", "must be non-negative".into());
            }
            if w.nodes.iter().any(|n| !ids.contains(n)) {
                bad("faults.wake_lag.nodes", "refers to an unknown node".into());
            }
        }
        for (i, d) in self.faults.drops.iter().enumerate() {
            if d.kind().is_none() {
                bad(&format!("faults.drops[{i}].msg"), format!("unknown message kind {:?}", d.msg));
            }
            if !ids.contains(&d.at) {
                bad(&format!("faults.drops[{i}].at"), format!("unknown node {}", d.at));
            }
        }
        if !issues.is_empty() {
            return Err(ValidationError { issues });
        }
        if !self.snoopers.is_empty() {
            for n in &self.nodes {
                if !self.snoopers.iter().any(|s| self.snooper_covers(s, n)) {
                    warnings.push(format!("node {} is not covered by any snooper", n.id));
                }
            }
        }
        Ok(warnings)
    }

    /// Whether a snooper hears a node's transmissions in the noise-free model.
    pub fn snooper_covers(&self, s: &SnooperSpec, n: &NodeSpec) -> bool {
        let d = ((s.x - n.x).powi(2) + (s.y - n.y).powi(2)).sqrt();
        d <= s.capture_radius && mean_rssi(&self.link, &PairChannel::line_of_sight(d)) >= self.link.sensitivity
    }

    // ======================================================================
    // Canned scenarios

    /// 24 nodes on a 25 m grid (a 5×5 layout with the last cell empty),
    /// ids 1–24 in row order, sink 2, seven snoopers.
    pub fn field_deployment(seed: u64) -> Self {
        let spacing = 25.0;
        let nodes = (0..24u16)
            .map(|i| NodeSpec {
                id: NodeId(i + 1),
                x: f64::from(i % 5) * spacing,
                y: f64::from(i / 5) * spacing,
                initial_soc: 1.0,
                drift_ppm: None,
                boot_offset_us: None,
            })
            .collect();
        let snoopers = [(0.0, 50.0), (50.0, 0.0), (50.0, 50.0), (50.0, 100.0), (100.0, 50.0), (25.0, 75.0), (75.0, 25.0)]
            .into_iter()
            .map(|(x, y)| SnooperSpec {
                x,
                y,
                capture_radius: 60.0,
            })
            .collect();
        Self {
            schema_version: SCHEMA_VERSION,
            name: "field".into(),
            seed,
            rounds: 1,
            sink: NodeId(2),
            start_clock: default_start(),
            daylight: SolarParams::default(),
            link: LinkModelParams {
                pl0: 40.0,
                ..LinkModelParams::default()
            },
            protocol: ProtocolParams::default(),
            energy: EnergyConfig::default(),
            clock: ClockConfig::default(),
            faults: Faults::default(),
            nodes,
            obstacles: Vec::new(),
            failures: Vec::new(),
            snoopers,
        }
    }

    /// First field test: 10 min interval, 50 slots, 3 rounds, no initial
    /// slot delay and no RSSI tiering.
    pub fn test_case_1(seed: u64) -> Self {
        let mut s = Self::field_deployment(seed);
        s.name = "test-case-1".into();
        s.rounds = 3;
        s.protocol.dci_s = 600.0;
        s.protocol.slots_per_round = 50;
        s.protocol.initial_slot_delay_ms = 0.0;
        s.protocol.tiering = false;
        s
    }

    /// Second field test: 1 h interval, 30 slots, 3 rounds, 500 ms initial
    /// slot delay.
    pub fn test_case_2(seed: u64) -> Self {
        let mut s = Self::field_deployment(seed);
        s.name = "test-case-2".into();
        s.rounds = 3;
        s.protocol.dci_s = 3_600.0;
        s.protocol.slots_per_round = 30;
        s.protocol.initial_slot_delay_ms = 500.0;
        s
    }

    /// Third field test: 3 h interval, 25 slots, with nodes 10 and 22 off
    /// from the first slot of round 1 and node 13 off from slot 3 of round 2.
    pub fn test_case_3(seed: u64) -> Self {
        let mut s = Self::field_deployment(seed);
        s.name = "test-case-3".into();
        s.rounds = 3;
        s.protocol.dci_s = 10_800.0;
        s.protocol.slots_per_round = 25;
        s.protocol.initial_slot_delay_ms = 500.0;
        s.failures = vec![
            FailureSpec {
                node: NodeId(10),
                at_round: 1,
                at_slot: 0,
            },
            FailureSpec {
                node: NodeId(22),
                at_round: 1,
                at_slot: 0,
            },
            FailureSpec {
                node: NodeId(13),
                at_round: 2,
                at_slot: 3,
            },
        ];
        s
    }

    /// Canned scenario by name: `tc1`, `tc2`, `tc3` or `field`.
    pub fn canned(name: &str, seed: u64) -> Option<Self> {
        match name {
            "tc1" | "test-case-1" => Some(Self::test_case_1(seed)),
            "tc2" | "test-case-2" => Some(Self::test_case_2(seed)),
            "tc3" | "test-case-3" => Some(Self::test_case_3(seed)),
            "field" => Some(Self::field_deployment(seed)),
            _ => None,
        }
    }
}
