//! Shared domain types, edge weights, graphs and collection trees.

mod export;
mod graph;
mod tree;
mod weight;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use export::{parse_edge_list, write_graph, write_tree, EdgeList, ExportError};
pub use graph::NetworkGraph;
pub use tree::{dijkstra_spt, rebuild_without, CollectionTree, TreeBuild};
pub use weight::{edge_weight, symmetrize, DEFAULT_K1, DEFAULT_K2};

/// Identifier of a node in a scenario.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct NodeId(pub u16);

impl NodeId {
    pub fn get(self) -> u16 {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl FromStr for NodeId {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(NodeId)
    }
}

impl From<u16> for NodeId {
    fn from(v: u16) -> Self {
        NodeId(v)
    }
}

/// One node's sensed values for a data-collection slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorReading {
    /// Volumetric soil moisture, percent.
    pub soil_moisture: f32,
    /// Soil temperature, °C.
    pub soil_temp: f32,
    /// Air temperature, °C.
    pub air_temp: f32,
    /// Relative humidity, percent, in [0, 100].
    pub rel_humidity: f32,
    /// Battery voltage under the measurement load, millivolts, in [2500, 4300].
    pub battery_mv: f64,
}

impl SensorReading {
    pub fn is_valid(&self) -> bool {
        (0.0..=100.0).contains(&self.rel_humidity) && (2500.0..=4300.0).contains(&self.battery_mv)
    }
}

/// Neighbour-table entry accumulated during discovery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkRecord {
    pub peer: NodeId,
    /// Running mean of the received signal strength, dBm.
    pub avg_rssi: f64,
    pub ndm_received: u32,
    pub ndm_expected: u32,
    /// Remaining capacity advertised by the peer, mAh.
    pub remote_capacity: f64,
}

impl LinkRecord {
    pub fn new(peer: NodeId, ndm_expected: u32) -> Self {
        Self {
            peer,
            avg_rssi: 0.0,
            ndm_received: 0,
            ndm_expected,
            remote_capacity: 0.0,
        }
    }

    /// Folds one more discovery reception into the running mean.
    pub fn observe(&mut self, rssi: f64, remote_capacity: f64) {
        self.ndm_received += 1;
        let n = f64::from(self.ndm_received);
        self.avg_rssi += (rssi - self.avg_rssi) / n;
        self.remote_capacity = remote_capacity;
        // duplicates beyond the advertised count never push the ratio over 1
        self.ndm_expected = self.ndm_expected.max(self.ndm_received);
    }

    pub fn delivery_ratio(&self) -> f64 {
        if self.ndm_expected == 0 {
            0.0
        } else {
            f64::from(self.ndm_received) / f64::from(self.ndm_expected)
        }
    }
}

/// Errors raised by the model-level operations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("remaining capacity must be positive (got {0} mAh)")]
    NonPositiveCapacity(f64),
    #[error("average RSSI must be negative (got {0} dBm)")]
    NonNegativeRssi(f64),
    #[error("k1 must be positive and k2 negative (got k1={k1}, k2={k2})")]
    BadConstants { k1: f64, k2: f64 },
    #[error("edge weights must be finite and non-negative (got {0})")]
    BadWeight(f64),
    #[error("self-edge on node {0}")]
    SelfEdge(NodeId),
    #[error("root {0} is not a vertex of the graph")]
    MissingRoot(NodeId),
    #[error("root {0} cannot be in the failed set")]
    RootFailed(NodeId),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn running_mean_and_counts() {
        let mut rec = LinkRecord::new(NodeId(4), 60);
        for _ in 0..60 {
            rec.observe(-60.0, 2200.0);
        }
        assert_eq!(rec.ndm_received, 60);
        assert!((rec.avg_rssi + 60.0).abs() < 1e-12);
        rec.observe(-70.0, 2100.0);
        assert_eq!(rec.ndm_received, 61);
        assert!(rec.ndm_received <= rec.ndm_expected);
        assert!((rec.avg_rssi - (-60.0 * 60.0 - 70.0) / 61.0).abs() < 1e-9);
        assert_eq!(rec.remote_capacity, 2100.0);
    }

    #[test]
    fn reading_bounds() {
        let r = SensorReading {
            soil_moisture: 18.0,
            soil_temp: 24.0,
            air_temp: 22.0,
            rel_humidity: 70.0,
            battery_mv: 3900.0,
        };
        assert!(r.is_valid());
        assert!(!SensorReading { rel_humidity: 101.0, ..r }.is_valid());
        assert!(!SensorReading { battery_mv: 2400.0, ..r }.is_valid());
    }
}
