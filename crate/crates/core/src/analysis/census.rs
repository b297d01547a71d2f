//! Node yield and packet census recomputed from a trace.
//!
//! The rules mirror the engine's live counters exactly: a DATA frame counts
//! for its sender in the sender's round, a DATA_ACK counts for the node it
//! is addressed to, and a SLEEP counts as received by every child of the
//! sender in the most recent tree the sink announced.

use std::collections::BTreeMap;

use super::metrics::{MetricsBundle, NodeCensus};
use crate::engine::{EventKind, TraceRecord};
use crate::model::NodeId;
use crate::wire::MsgKind;

/// Replays a trace into the same counters the engine keeps while running.
pub fn replay_metrics(records: &[TraceRecord]) -> MetricsBundle {
    let mut out = MetricsBundle::default();
    let mut parent_of: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    for r in records {
        let round = r.round.unwrap_or(0);
        match r.event {
            EventKind::Round => {
                out.round_mut(round);
            }
            EventKind::Tree => {
                let Some(src) = r.src else { continue };
                if r.get("root") == Some("1") {
                    parent_of.clear();
                } else if let Some(p) = r.dst {
                    parent_of.insert(src, p);
                }
                let yields = &mut out.round_mut(round).yields;
                yields.entry(src).or_insert(0);
                if let Some(p) = r.dst {
                    yields.entry(p).or_insert(0);
                }
            }
            EventKind::Reading => {
                if let Some(src) = r.src {
                    *out.round_mut(round).yields.entry(src).or_insert(0) += 1;
                }
            }
            EventKind::Tx => {
                let Some(kind) = r.msg else { continue };
                let rm = out.round_mut(round);
                *rm.tx_by_kind.entry(kind).or_insert(0) += 1;
                match kind {
                    MsgKind::Data => {
                        let c = rm.census.entry(r.node).or_default();
                        c.data_sent += 1;
                        if let (Some(s), Some(t)) = (r.slot, r.get_parsed::<u32>("try")) {
                            let e = c.max_tries.entry(s).or_insert(0);
                            *e = (*e).max(t);
                        }
                    }
                    MsgKind::DataAck => {
                        if let Some(d) = r.dst {
                            rm.census.entry(d).or_default().acks_received += 1;
                        }
                    }
                    MsgKind::Sleep => {
                        rm.census.entry(r.node).or_default().sleeps_sent += 1;
                        for (&c, _) in parent_of.iter().filter(|(_, &p)| p == r.node) {
                            rm.census.entry(c).or_default().sleeps_received += 1;
                        }
                    }
                    _ => {}
                }
            }
            _ => {}
        }
    }
    out
}

/// Yield of every node in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct YieldReport {
    pub round: u32,
    pub yields: BTreeMap<NodeId, u32>,
    /// Set when the trace ends before the round does.
    pub partial: bool,
}

pub fn node_yield(records: &[TraceRecord], round: u32, truncated: bool) -> Option<YieldReport> {
    let m = replay_metrics(records);
    let rm = m.round(round)?;
    let later = records.iter().any(|r| r.event == EventKind::Round && r.round.is_some_and(|x| x > round));
    Some(YieldReport {
        round,
        yields: rm.yields.clone(),
        partial: truncated && !later,
    })
}

pub fn packet_census(records: &[TraceRecord], round: u32) -> Option<BTreeMap<NodeId, NodeCensus>> {
    replay_metrics(records).round(round).map(|r| r.census.clone())
}
