//! Trace records and their tab-separated text form.
//!
//! Columns, in order:
//!
//! ```text
//! t_us node event msg src dst seq round slot rssi extra
//! ```
//!
//! Absent fields are written as `-`. Broadcast destinations are written as
//! `*`. `extra` is a `;`-separated list of `key=value` pairs. Lines starting
//! with `#` are comments.

use std::fmt;
use std::str::FromStr;

use crate::model::NodeId;
use crate::wire::{MsgKind, BROADCAST};

pub const TRACE_HEADER: &str = "#t_us\tnode\tevent\tmsg\tsrc\tdst\tseq\tround\tslot\trssi\textra";
const COLUMNS: usize = 11;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TraceError {
    #[error("line {line}: expected {COLUMNS} columns, found {found}")]
    Columns { line: usize, found: usize },
    #[error("line {line}: bad {field} {value:?}")]
    Field { line: usize, field: &'static str, value: String },
    #[error("line {line}: time goes backwards")]
    NonMonotone { line: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    Tx,
    Rx,
    Lost,
    State,
    Timeout,
    Wake,
    Collect,
    Reading,
    Edge,
    Tree,
    Neighbours,
    NodeFail,
    Fault,
    Warn,
    Round,
    Trigger,
}

impl EventKind {
    pub const ALL: [EventKind; 16] = [
        EventKind::Tx,
        EventKind::Rx,
        EventKind::Lost,
        EventKind::State,
        EventKind::Timeout,
        EventKind::Wake,
        EventKind::Collect,
        EventKind::Reading,
        EventKind::Edge,
        EventKind::Tree,
        EventKind::Neighbours,
        EventKind::NodeFail,
        EventKind::Fault,
        EventKind::Warn,
        EventKind::Round,
        EventKind::Trigger,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EventKind::Tx => "TX",
            EventKind::Rx => "RX",
            EventKind::Lost => "LOST",
            EventKind::State => "STATE",
            EventKind::Timeout => "TIMEOUT",
            EventKind::Wake => "WAKE",
            EventKind::Collect => "COLLECT",
            EventKind::Reading => "READING",
            EventKind::Edge => "EDGE",
            EventKind::Tree => "TREE",
            EventKind::Neighbours => "NEIGHBOURS",
            EventKind::NodeFail => "NODEFAIL",
            EventKind::Fault => "FAULT",
            EventKind::Warn => "WARN",
            EventKind::Round => "ROUND",
            EventKind::Trigger => "TRIGGER",
        }
    }

    /// Records the sink (or the engine on its behalf) writes; snoopers pass
    /// these through unchanged.
    pub fn is_sink_record(self) -> bool {
        matches!(
            self,
            EventKind::Collect | EventKind::Reading | EventKind::Edge | EventKind::Tree | EventKind::Round | EventKind::Trigger
        )
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown event {s:?}"))
    }
}

/// One line of a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t_us: u64,
    pub node: NodeId,
    pub event: EventKind,
    pub msg: Option<MsgKind>,
    pub src: Option<NodeId>,
    pub dst: Option<NodeId>,
    pub seq: Option<u32>,
    pub round: Option<u32>,
    pub slot: Option<u32>,
    /// RSSI in dBm, kept to two decimals.
    pub rssi: Option<f64>,
    pub extra: Vec<(String, String)>,
}

impl TraceRecord {
    pub fn new(t_us: u64, node: NodeId, event: EventKind) -> Self {
        Self {
            t_us,
            node,
            event,
            msg: None,
            src: None,
            dst: None,
            seq: None,
            round: None,
            slot: None,
            rssi: None,
            extra: Vec::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl fmt::Display) -> Self {
        self.push(key, value);
        self
    }

    pub fn push(&mut self, key: &str, value: impl fmt::Display) {
        self.extra.push((sanitize(key), sanitize(&value.to_string())));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.extra.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn get_parsed<T: FromStr>(&self, key: &str) -> Option<T> {
        self.get(key).and_then(|v| v.parse().ok())
    }

    /// Sets the RSSI, rounded to two decimals.
    pub fn set_rssi(&mut self, rssi: f64) {
        self.rssi = Some((rssi * 100.0).round() / 100.0);
    }
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if matches!(c, '\t' | '\n' | '\r' | ';' | '=') { '_' } else { c })
        .collect()
}

fn opt<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "-".to_string(), |x| x.to_string())
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dst = match self.dst {
            Some(d) if d == BROADCAST => "*".to_string(),
            other => opt(&other),
        };
        let rssi = self.rssi.map_or_else(|| "-".to_string(), |r| format!("{r:.2}"));
        let extra = if self.extra.is_empty() {
            "-".to_string()
        } else {
            self.extra
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(";")
        };
        write!(
            f,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.t_us,
            self.node,
            self.event,
            opt(&self.msg),
            opt(&self.src),
            dst,
            opt(&self.seq),
            opt(&self.round),
            opt(&self.slot),
            rssi,
            extra
        )
    }
}

fn field<T: FromStr>(line: usize, name: &'static str, s: &str) -> Result<Option<T>, TraceError> {
    if s == "-" {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| TraceError::Field {
        line,
        field: name,
        value: s.to_string(),
    })
}

fn required<T: FromStr>(line: usize, name: &'static str, s: &str) -> Result<T, TraceError> {
    field(line, name, s)?.ok_or_else(|| TraceError::Field {
        line,
        field: name,
        value: s.to_string(),
    })
}

/// Parses one record line. `line` is the 1-based line number used in errors.
pub fn parse_line(text: &str, line: usize) -> Result<TraceRecord, TraceError> {
    let cols: Vec<&str> = text.split('\t').collect();
    if cols.len() != COLUMNS {
        return Err(TraceError::Columns { line, found: cols.len() });
    }
    let dst = match cols[5] {
        "*" => Some(BROADCAST),
        s => field(line, "dst", s)?,
    };
    let rssi: Option<f64> = field(line, "rssi", cols[9])?;
    if rssi.is_some_and(|r| !r.is_finite()) {
        return Err(TraceError::Field {
            line,
            field: "rssi",
            value: cols[9].to_string(),
        });
    }
    let mut extra = Vec::new();
    if cols[10] != "-" {
        for pair in cols[10].split(';') {
            let (k, v) = pair.split_once('=').ok_or_else(|| TraceError::Field {
                line,
                field: "extra",
                value: pair.to_string(),
            })?;
            extra.push((k.to_string(), v.to_string()));
        }
    }
    Ok(TraceRecord {
        t_us: required(line, "t_us", cols[0])?,
        node: required(line, "node", cols[1])?,
        event: required(line, "event", cols[2])?,
        msg: field(line, "msg", cols[3])?,
        src: field(line, "src", cols[4])?,
        dst,
        seq: field(line, "seq", cols[6])?,
        round: field(line, "round", cols[7])?,
        slot: field(line, "slot", cols[8])?,
        rssi,
        extra,
    })
}

/// A parsed trace. `truncated` is set when the text ended mid-line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    pub truncated: bool,
}

/// Parses a whole trace, requiring non-decreasing timestamps. A final line
/// without its newline that fails to parse marks the trace as truncated
/// instead of failing.
pub fn parse_trace(text: &str) -> Result<Trace, TraceError> {
    let mut out = Trace::default();
    let ends_clean = text.is_empty() || text.ends_with('\n');
    let lines: Vec<&str> = text.lines().collect();
    let mut last_t = 0;
    for (i, l) in lines.iter().enumerate() {
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let is_last = i + 1 == lines.len();
        match parse_line(l, i + 1) {
            Ok(r) => {
                if r.t_us < last_t {
                    return Err(TraceError::NonMonotone { line: i + 1 });
                }
                last_t = r.t_us;
                out.records.push(r);
            }
            Err(_) if is_last && !ends_clean => {
                out.truncated = true;
            }
            Err(e) => return Err(e),
        }
    }
    if !ends_clean {
        out.truncated = true;
    }
    Ok(out)
}

/// Renders records with the header line.
pub fn write_trace(records: &[TraceRecord]) -> String {
    let mut s = String::with_capacity(records.len() * 64 + 80);
    s.push_str(TRACE_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&r.to_string());
        s.push('\n');
    }
    s
}
