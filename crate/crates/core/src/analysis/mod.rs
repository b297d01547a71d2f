//! Trace analyzers: node yield, packet census, ACK-SLEEP dualloss,
//! energy tables, graph similarity and the message-bound audit.
//!
//! Every analyzer is a pure function of the records it is given. The
//! [`View`] says whether those records are the ground truth or what the
//! snoopers overheard; in the snooper view receptions are unknown.

pub mod bound;
pub mod census;
pub mod dualloss;
pub mod energy_table;
pub mod graph_diff;
pub mod lint;
pub mod metrics;
pub mod report;

use std::str::FromStr;

pub use bound::{bound_audit, BoundAudit, BoundOverrides};
pub use census::{node_yield, packet_census, replay_metrics, YieldReport};
pub use dualloss::{detect_dualloss, DuallossEvent};
pub use energy_table::{energy_table, EnergyRow, EnergyTable};
pub use graph_diff::{edge_set, graph_diff, graphs_from_trace, snapshots, EdgeSet, GraphDiff, Snapshot};
pub use lint::{lint_trace, LintIssue};
pub use metrics::{MetricsBundle, NodeCensus, RoundMetrics};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalysisError {
    #[error("round {0} is not in the trace")]
    MissingRound(u32),
    #[error("round {0} never reached its trigger point")]
    Incomplete(u32),
    #[error("ROUND record lacks {0}")]
    MissingField(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum View {
    #[default]
    Truth,
    Snooper,
}

impl FromStr for View {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "truth" => Ok(View::Truth),
            "snooper" => Ok(View::Snooper),
            _ => Err(format!("unknown view {s:?}, expected truth or snooper")),
        }
    }
}
