//! Energy expenditure per node from the battery voltages carried in the
//! readings that reached the sink.

use std::collections::{BTreeMap, BTreeSet};

use crate::energy::{ocv_from_loaded, SocOcvCurve};
use crate::engine::{EventKind, TraceRecord};
use crate::model::NodeId;

/// Load under which nodes measure their battery voltage, amperes.
const MEASUREMENT_LOAD_A: f64 = 0.010;

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyRow {
    pub node: NodeId,
    pub delta_mv: f64,
    pub delta_mah: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnergyTable {
    /// Sorted by `delta_mah`, largest first.
    pub rows: Vec<EnergyRow>,
    pub warnings: Vec<String>,
}

/// Builds the table over the given rounds (all rounds when `None`).
pub fn energy_table(records: &[TraceRecord], rounds: Option<(u32, u32)>, curve: &SocOcvCurve) -> EnergyTable {
    let mut cap = None;
    let mut r0 = None;
    let mut first: BTreeMap<NodeId, f64> = BTreeMap::new();
    let mut last: BTreeMap<NodeId, f64> = BTreeMap::new();
    let mut seen: BTreeSet<NodeId> = BTreeSet::new();
    let inside = |r: &TraceRecord| match (rounds, r.round) {
        (None, _) => true,
        (Some((a, b)), Some(x)) => a <= x && x <= b,
        (Some(_), None) => false,
    };
    for r in records.iter().filter(|r| inside(r)) {
        match r.event {
            EventKind::Round => {
                cap = cap.or(r.get_parsed::<f64>("cap_mah"));
                r0 = r0.or(r.get_parsed::<f64>("r0"));
            }
            EventKind::Tree => {
                for id in [r.src, r.dst].into_iter().flatten() {
                    seen.insert(id);
                }
            }
            EventKind::Reading => {
                let (Some(src), Some(mv)) = (r.src, r.get_parsed::<f64>("mv")) else { continue };
                first.entry(src).or_insert(mv);
                last.insert(src, mv);
            }
            _ => {}
        }
    }
    let mut table = EnergyTable::default();
    let (Some(cap), Some(r0)) = (cap, r0) else {
        table.warnings.push("no ROUND record with capacity and resistance".into());
        return table;
    };
    let soc = |mv: f64| curve.soc_from_ocv(ocv_from_loaded(mv / 1000.0, MEASUREMENT_LOAD_A, r0)).soc;
    for (&node, &a) in &first {
        let b = last[&node];
        table.rows.push(EnergyRow {
            node,
            delta_mv: a - b,
            delta_mah: (soc(a) - soc(b)) * cap,
        });
    }
    for id in seen.iter().filter(|id| !first.contains_key(id)) {
        table.warnings.push(format!("node {id} has no battery report in the window"));
    }
    table
        .rows
        .sort_by(|x, y| y.delta_mah.total_cmp(&x.delta_mah).then(x.node.cmp(&y.node)));
    table
}
