//! Per-round counters shared by the engine (counted live) and the trace
//! analyzers (recounted from a trace), so the two can be compared exactly.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::model::NodeId;
use crate::wire::MsgKind;

/// Transmission counts of one node in one round, as seen on the air.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct NodeCensus {
    /// DATA frames sent, retries included.
    pub data_sent: u32,
    /// DATA_ACK frames addressed to the node.
    pub acks_received: u32,
    /// SLEEP broadcasts sent.
    pub sleeps_sent: u32,
    /// SLEEP broadcasts sent by the node's parent in the current tree.
    pub sleeps_received: u32,
    /// Highest DATA attempt number per slot.
    pub max_tries: BTreeMap<u32, u32>,
}

impl NodeCensus {
    /// Most frequent per-slot maximum; ties resolve to the smaller value.
    pub fn max_tries_mode(&self) -> Option<u32> {
        let mut freq: BTreeMap<u32, u32> = BTreeMap::new();
        for &t in self.max_tries.values() {
            *freq.entry(t).or_insert(0) += 1;
        }
        let best = freq.values().copied().max()?;
        freq.into_iter().find(|&(_, c)| c == best).map(|(t, _)| t)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RoundMetrics {
    pub round: u32,
    /// Slots in which each node's reading reached the sink.
    pub yields: BTreeMap<NodeId, u32>,
    pub census: BTreeMap<NodeId, NodeCensus>,
    /// Every transmission of the round by message kind.
    pub tx_by_kind: BTreeMap<MsgKind, u64>,
}

impl RoundMetrics {
    pub fn new(round: u32) -> Self {
        Self {
            round,
            ..Self::default()
        }
    }

    pub fn tx(&self, kind: MsgKind) -> u64 {
        self.tx_by_kind.get(&kind).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MetricsBundle {
    pub rounds: Vec<RoundMetrics>,
}

impl MetricsBundle {
    pub fn round(&self, round: u32) -> Option<&RoundMetrics> {
        self.rounds.iter().find(|r| r.round == round)
    }

    pub fn round_mut(&mut self, round: u32) -> &mut RoundMetrics {
        if let Some(i) = self.rounds.iter().position(|r| r.round == round) {
            return &mut self.rounds[i];
        }
        self.rounds.push(RoundMetrics::new(round));
        self.rounds.sort_by_key(|r| r.round);
        let i = self.rounds.iter().position(|r| r.round == round).expect("just inserted");
        &mut self.rounds[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_prefers_smaller_on_tie() {
        let mut c = NodeCensus::default();
        assert_eq!(c.max_tries_mode(), None);
        c.max_tries.insert(0, 2);
        c.max_tries.insert(1, 1);
        assert_eq!(c.max_tries_mode(), Some(1));
        c.max_tries.insert(2, 2);
        assert_eq!(c.max_tries_mode(), Some(2));
    }

    #[test]
    fn round_mut_keeps_order() {
        let mut b = MetricsBundle::default();
        b.round_mut(3).yields.insert(NodeId(1), 2);
        b.round_mut(1);
        b.round_mut(3).yields.insert(NodeId(2), 1);
        let order: Vec<u32> = b.rounds.iter().map(|r| r.round).collect();
        assert_eq!(order, vec![1, 3]);
        assert_eq!(b.round(3).unwrap().yields.len(), 2);
    }
}
