//! Structural checks on a trace: ordering, round numbering, and frames
//! received without a matching transmission.

use std::collections::BTreeSet;

use crate::engine::{EventKind, TraceRecord};
use crate::model::NodeId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LintIssue {
    pub index: usize,
    pub message: String,
}

pub fn lint_trace(records: &[TraceRecord]) -> Vec<LintIssue> {
    let mut issues = Vec::new();
    let mut last_t = 0;
    let mut last_round = 0;
    let mut sent: BTreeSet<(NodeId, u32)> = BTreeSet::new();
    for (index, r) in records.iter().enumerate() {
        let mut issue = |message: String| issues.push(LintIssue { index, message });
        if r.t_us < last_t {
            issue(format!("time goes back from {last_t} to {}", r.t_us));
        }
        last_t = r.t_us;
        match r.event {
            EventKind::Round => {
                let round = r.round.unwrap_or(0);
                if round != last_round + 1 {
                    issue(format!("round {round} follows round {last_round}"));
                }
                last_round = round;
            }
            EventKind::Tx => {
                if r.msg.is_none() || r.src != Some(r.node) {
                    issue("transmission without a message or from another source".into());
                }
                if let (Some(src), Some(seq)) = (r.src, r.seq) {
                    sent.insert((src, seq));
                }
            }
            EventKind::Rx => {
                if let (Some(src), Some(seq)) = (r.src, r.seq) {
                    if !sent.contains(&(src, seq)) {
                        issue(format!("reception of {src}/{seq} that was never sent"));
                    }
                }
            }
            _ => {}
        }
        if r.round.is_some_and(|x| x > last_round) {
            issue(format!("record in round {} before its ROUND header", r.round.unwrap_or(0)));
        }
    }
    issues
}
