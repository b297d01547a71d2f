//! Rendering of analyzer results as aligned text tables and as
//! line-delimited JSON records.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde_json::json;

use super::{BoundAudit, DuallossEvent, EnergyTable, GraphDiff, NodeCensus, YieldReport};
use crate::model::NodeId;

/// A rendered report: a human-readable table and machine-readable lines.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Report {
    pub table: String,
    pub records: String,
}

fn lines(values: impl IntoIterator<Item = serde_json::Value>) -> String {
    values.into_iter().map(|v| format!("{v}\n")).collect()
}

pub fn yield_report(y: &YieldReport) -> Report {
    let mut table = format!("round {} node yield{}\n", y.round, if y.partial { " (partial)" } else { "" });
    let _ = writeln!(table, "{:>6} {:>6}", "node", "yield");
    for (n, c) in &y.yields {
        let _ = writeln!(table, "{:>6} {:>6}", n, c);
    }
    let records = lines(y.yields.iter().map(|(n, c)| {
        json!({"report": "yield", "round": y.round, "node": n.0, "yield": c, "partial": y.partial})
    }));
    Report { table, records }
}

pub fn census_report(round: u32, census: &BTreeMap<NodeId, NodeCensus>) -> Report {
    let mut table = format!("round {round} packet census\n");
    let _ = writeln!(
        table,
        "{:>6} {:>9} {:>9} {:>9} {:>9} {:>10}",
        "node", "data", "acks", "sleep_tx", "sleep_rx", "tries_mode"
    );
    for (n, c) in census {
        let mode = c.max_tries_mode().map_or("-".to_string(), |m| m.to_string());
        let _ = writeln!(
            table,
            "{:>6} {:>9} {:>9} {:>9} {:>9} {:>10}",
            n, c.data_sent, c.acks_received, c.sleeps_sent, c.sleeps_received, mode
        );
    }
    let records = lines(census.iter().map(|(n, c)| {
        json!({
            "report": "census", "round": round, "node": n.0,
            "data_sent": c.data_sent, "acks_received": c.acks_received,
            "sleeps_sent": c.sleeps_sent, "sleeps_received": c.sleeps_received,
            "max_tries": c.max_tries.values().collect::<Vec<_>>(),
            "max_tries_mode": c.max_tries_mode(),
        })
    }));
    Report { table, records }
}

pub fn dualloss_report(events: &[DuallossEvent]) -> Report {
    let mut table = format!("{} ACK-SLEEP dualloss events\n", events.len());
    let _ = writeln!(table, "{:>6} {:>6} {:>5} {:>8} {:>8} {:>10}", "node", "round", "slot", "seq", "retries", "data_lost");
    for e in events {
        let _ = writeln!(
            table,
            "{:>6} {:>6} {:>5} {:>8} {:>8} {:>10}",
            e.node,
            e.round,
            e.slot,
            e.seq,
            e.retries,
            e.data_lost()
        );
    }
    let records = lines(events.iter().map(|e| {
        json!({
            "report": "dualloss", "node": e.node.0, "round": e.round, "slot": e.slot,
            "seq": e.seq, "retries": e.retries, "data_lost": e.data_lost(),
        })
    }));
    Report { table, records }
}

pub fn energy_report(t: &EnergyTable) -> Report {
    let mut table = String::from("energy expenditure, largest first\n");
    let _ = writeln!(table, "{:>6} {:>10} {:>10}", "node", "dV_mV", "dQ_mAh");
    for r in &t.rows {
        let _ = writeln!(table, "{:>6} {:>10.2} {:>10.2}", r.node, r.delta_mv, r.delta_mah);
    }
    for w in &t.warnings {
        let _ = writeln!(table, "warning: {w}");
    }
    let records = lines(t.rows.iter().map(|r| {
        json!({"report": "energy", "node": r.node.0, "delta_mv": r.delta_mv, "delta_mah": r.delta_mah})
    }));
    Report { table, records }
}

pub fn graph_diff_report(diffs: &[GraphDiff]) -> Report {
    let mut table = String::from("consecutive graph changes\n");
    let _ = writeln!(table, "{:>6} {:>7} {:>8} {:>9} {:>7}", "pair", "added", "removed", "retained", "common");
    for (i, d) in diffs.iter().enumerate() {
        let _ = writeln!(
            table,
            "{:>6} {:>7} {:>8} {:>9} {:>7}",
            format!("{}-{}", i + 1, i + 2),
            d.added,
            d.removed,
            d.retained,
            d.common_to_all
        );
    }
    let records = lines(diffs.iter().enumerate().map(|(i, d)| {
        json!({
            "report": "graph_diff", "from": i + 1, "to": i + 2, "added": d.added,
            "removed": d.removed, "retained": d.retained, "common_to_all": d.common_to_all,
        })
    }));
    Report { table, records }
}

pub fn bound_report(a: &BoundAudit) -> Report {
    let mut table = format!(
        "round {} message bound audit (n={}, k={}, D={}, m={})\n",
        a.round, a.n, a.k, a.d, a.m
    );
    let _ = writeln!(table, "{:>10} {:>8} {:>8} {:>8} {:>6}", "phase", "actual", "bound", "slack", "ok");
    for (name, actual, bound) in a.phases() {
        let _ = writeln!(
            table,
            "{:>10} {:>8} {:>8} {:>8} {:>6}",
            name,
            actual,
            bound,
            bound as i64 - actual as i64,
            actual <= bound
        );
    }
    let _ = writeln!(table, "verdict: {}", if a.passed() { "PASS" } else { "FAIL" });
    let mut recs: Vec<_> = a
        .phases()
        .into_iter()
        .map(|(name, actual, bound)| {
            json!({"report": "bound", "round": a.round, "phase": name, "actual": actual, "bound": bound, "ok": actual <= bound})
        })
        .collect();
    recs.push(json!({
        "report": "bound", "round": a.round, "n": a.n, "k": a.k, "d": a.d, "m": a.m,
        "passed": a.passed(), "violations": a.violations,
    }));
    Report {
        table,
        records: lines(recs),
    }
}
