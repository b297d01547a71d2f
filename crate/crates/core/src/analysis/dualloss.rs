//! ACK-SLEEP dualloss: a child whose DATA reached the parent but which
//! missed both the acknowledgement and the following SLEEP, and therefore
//! retried up to the cap.

use std::collections::{BTreeMap, BTreeSet};

use super::View;
use crate::engine::{EventKind, TraceRecord};
use crate::model::NodeId;
use crate::wire::MsgKind;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DuallossEvent {
    pub node: NodeId,
    pub round: u32,
    pub slot: u32,
    pub seq: u32,
    pub retries: u32,
    /// Origins carried by the packet whose readings never reached the sink.
    pub lost_origins: Vec<NodeId>,
}

impl DuallossEvent {
    pub fn data_lost(&self) -> bool {
        !self.lost_origins.is_empty()
    }
}

struct DataTx {
    node: NodeId,
    round: u32,
    slot: u32,
    dslot: u32,
    tries: u32,
    origins: Vec<NodeId>,
}

pub fn detect_dualloss(records: &[TraceRecord], view: View) -> Vec<DuallossEvent> {
    let mut cap = 10;
    let mut data: BTreeMap<(NodeId, u32), DataTx> = BTreeMap::new();
    let mut acked: BTreeSet<(NodeId, u32)> = BTreeSet::new();
    let mut sleep_rx: BTreeSet<(NodeId, u32, u32)> = BTreeSet::new();
    let mut readings: BTreeSet<(u32, u32, NodeId)> = BTreeSet::new();
    for r in records {
        let round = r.round.unwrap_or(0);
        match (r.event, r.msg) {
            (EventKind::Round, _) => {
                if let Some(c) = r.get_parsed("max_retries") {
                    cap = c;
                }
            }
            (EventKind::Reading, _) => {
                if let (Some(s), Some(o)) = (r.slot, r.src) {
                    readings.insert((round, s, o));
                }
            }
            (EventKind::Tx, Some(MsgKind::Data)) => {
                let (Some(seq), Some(slot)) = (r.seq, r.slot) else { continue };
                let tries = r.get_parsed("try").unwrap_or(1);
                let e = data.entry((r.node, seq)).or_insert_with(|| DataTx {
                    node: r.node,
                    round,
                    slot,
                    dslot: r.get_parsed("dslot").unwrap_or(slot),
                    tries: 0,
                    origins: r
                        .get("origins")
                        .map(|s| s.split(',').filter_map(|o| o.parse().ok()).collect())
                        .unwrap_or_default(),
                });
                e.tries = e.tries.max(tries);
            }
            (EventKind::Tx, Some(MsgKind::DataAck)) => {
                if let (Some(d), Some(a)) = (r.dst, r.get_parsed("acked")) {
                    acked.insert((d, a));
                }
            }
            (EventKind::Rx, Some(MsgKind::Sleep)) => {
                if let Some(s) = r.slot {
                    sleep_rx.insert((r.node, round, s));
                }
            }
            _ => {}
        }
    }
    data.into_iter()
        .filter(|(key, d)| d.tries >= cap && acked.contains(key))
        .filter(|(_, d)| view == View::Snooper || !sleep_rx.contains(&(d.node, d.round, d.slot)))
        .map(|((node, seq), d)| DuallossEvent {
            node,
            round: d.round,
            slot: d.slot,
            seq,
            retries: d.tries,
            lost_origins: d
                .origins
                .iter()
                .copied()
                .filter(|o| !readings.contains(&(d.round, d.dslot, *o)))
                .collect(),
        })
        .collect()
}
