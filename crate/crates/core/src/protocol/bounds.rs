//! Worst-case message counts of one round's setup phases.

use serde::{Deserialize, Serialize};

/// Upper bounds on transmissions per phase for a network of `n` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseBounds {
    /// NDM beacons: `k·n`.
    pub discovery: u64,
    /// NBM relays plus acknowledgements: `(D+1)(n−1)²`.
    pub flooding: u64,
    /// CDM and its acknowledgement per tree edge: `2(n−1)`.
    pub tree: u64,
    /// SYNC beacons and SYNCED reports: `(m+1)(n−1)`.
    pub sync: u64,
}

impl PhaseBounds {
    pub fn total(&self) -> u64 {
        self.discovery + self.flooding + self.tree + self.sync
    }
}

/// Bounds for `n` nodes sending `k` NDMs each, maximum degree `d` and `m`
/// synchronization rounds.
pub fn message_bound(n: u64, k: u64, d: u64, m: u64) -> PhaseBounds {
    let others = n.saturating_sub(1);
    PhaseBounds {
        discovery: k * n,
        flooding: (d + 1) * others * others,
        tree: 2 * others,
        sync: (m + 1) * others,
    }
}
