//! Message-bound audit of a round's setup: every transmission before the
//! trigger instant is attributed to its phase and checked against the
//! worst-case bound.

use std::collections::{BTreeMap, BTreeSet};

use super::graph_diff::undirected;
use super::AnalysisError;
use crate::engine::{EventKind, TraceRecord};
use crate::model::NodeId;
use crate::protocol::{message_bound, PhaseBounds};
use crate::wire::MsgKind;

/// Values that replace the ones measured from the trace.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BoundOverrides {
    pub degree: Option<u64>,
    pub sync_rounds: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundAudit {
    pub round: u32,
    pub n: u64,
    pub k: u64,
    pub d: u64,
    pub m: u64,
    pub bounds: PhaseBounds,
    pub actual: PhaseBounds,
    /// Names of phases whose count exceeds the bound, `total` included.
    pub violations: Vec<&'static str>,
}

impl BoundAudit {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn phases(&self) -> [(&'static str, u64, u64); 5] {
        [
            ("discovery", self.actual.discovery, self.bounds.discovery),
            ("flooding", self.actual.flooding, self.bounds.flooding),
            ("tree", self.actual.tree, self.bounds.tree),
            ("sync", self.actual.sync, self.bounds.sync),
            ("total", self.actual.total(), self.bounds.total()),
        ]
    }
}

/// Audits one round. `D` is the largest number of distinct nodes any node
/// heard NDMs from; traces without receptions fall back to the admitted
/// neighbour lists and then to the sink's graph. `m` is the largest number
/// of SYNC beacons a single node sent.
pub fn bound_audit(records: &[TraceRecord], round: u32, over: BoundOverrides) -> Result<BoundAudit, AnalysisError> {
    let in_round: Vec<&TraceRecord> = records.iter().filter(|r| r.round == Some(round)).collect();
    let header = in_round
        .iter()
        .find(|r| r.event == EventKind::Round)
        .ok_or(AnalysisError::MissingRound(round))?;
    let n: u64 = header.get_parsed("nodes").ok_or(AnalysisError::MissingField("nodes"))?;
    let k: u64 = header.get_parsed("k").ok_or(AnalysisError::MissingField("k"))?;
    let trigger: f64 = in_round
        .iter()
        .find(|r| r.event == EventKind::Trigger)
        .and_then(|r| r.get_parsed("at"))
        .ok_or(AnalysisError::Incomplete(round))?;

    let mut pairs: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();
    for r in in_round
        .iter()
        .filter(|r| r.event == EventKind::Rx && r.msg == Some(MsgKind::Ndm))
    {
        if let Some(s) = r.src {
            pairs.insert(undirected(r.node, s));
        }
    }
    if pairs.is_empty() {
        for r in in_round.iter().filter(|r| r.event == EventKind::Neighbours) {
            if let Some(d) = r.dst {
                pairs.insert(undirected(r.node, d));
            }
        }
    }
    if pairs.is_empty() {
        let first_epoch = in_round
            .iter()
            .filter(|r| r.event == EventKind::Edge)
            .filter_map(|r| r.get_parsed::<u32>("epoch"))
            .min();
        for r in in_round.iter().filter(|r| r.event == EventKind::Edge) {
            if r.get_parsed::<u32>("epoch") == first_epoch {
                if let (Some(u), Some(v)) = (r.src, r.dst) {
                    pairs.insert(undirected(u, v));
                }
            }
        }
    }
    let mut degree: BTreeMap<NodeId, u64> = BTreeMap::new();
    for (u, v) in pairs {
        *degree.entry(u).or_insert(0) += 1;
        *degree.entry(v).or_insert(0) += 1;
    }

    let mut actual = PhaseBounds {
        discovery: 0,
        flooding: 0,
        tree: 0,
        sync: 0,
    };
    let mut syncs: BTreeMap<NodeId, u64> = BTreeMap::new();
    for r in in_round.iter().filter(|r| r.event == EventKind::Tx && (r.t_us as f64) < trigger) {
        match r.msg {
            Some(MsgKind::Ndm) => actual.discovery += 1,
            Some(MsgKind::Nbm | MsgKind::NbmAck) => actual.flooding += 1,
            Some(MsgKind::Cdm | MsgKind::CdmAck) => actual.tree += 1,
            Some(MsgKind::Sync) => {
                actual.sync += 1;
                *syncs.entry(r.node).or_insert(0) += 1;
            }
            Some(MsgKind::Synced) => actual.sync += 1,
            _ => {}
        }
    }
    let d = over.degree.unwrap_or_else(|| degree.values().copied().max().unwrap_or(0));
    let m = over.sync_rounds.unwrap_or_else(|| syncs.values().copied().max().unwrap_or(0));
    let bounds = message_bound(n, k, d, m);
    let mut audit = BoundAudit {
        round,
        n,
        k,
        d,
        m,
        bounds,
        actual,
        violations: Vec::new(),
    };
    audit.violations = audit
        .phases()
        .into_iter()
        .filter(|&(_, a, b)| a > b)
        .map(|(name, _, _)| name)
        .collect();
    Ok(audit)
}
