//! Protocol messages and their binary encoding.
//!
//! Layout (big-endian):
//!
//! ```text
//! version:u8 kind:u8 src:u16 dst:u16 seq:u32 flags:u8 [mac_timestamp:u64] payload
//! ```
//!
//! `flags` bit 0 marks the presence of a MAC timestamp, which SYNC and
//! SLEEP always carry and no other kind does. Lists are prefixed by a
//! `u16` count.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{NodeId, SensorReading};

pub const WIRE_VERSION: u8 = 1;
/// Destination address of broadcast frames.
pub const BROADCAST: NodeId = NodeId(u16::MAX);
/// Upper bound on any list inside a frame.
pub const MAX_LIST_LEN: usize = 1024;

/// Message kind, one per frame type of the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MsgKind {
    Ndm,
    Nbm,
    NbmAck,
    Cdm,
    CdmAck,
    Sync,
    Synced,
    Data,
    DataAck,
    Sleep,
    NodeFail,
    NodeFailAck,
}

impl MsgKind {
    pub const ALL: [MsgKind; 12] = [
        MsgKind::Ndm,
        MsgKind::Nbm,
        MsgKind::NbmAck,
        MsgKind::Cdm,
        MsgKind::CdmAck,
        MsgKind::Sync,
        MsgKind::Synced,
        MsgKind::Data,
        MsgKind::DataAck,
        MsgKind::Sleep,
        MsgKind::NodeFail,
        MsgKind::NodeFailAck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MsgKind::Ndm => "NDM",
            MsgKind::Nbm => "NBM",
            MsgKind::NbmAck => "NBM_ACK",
            MsgKind::Cdm => "CDM",
            MsgKind::CdmAck => "CDM_ACK",
            MsgKind::Sync => "SYNC",
            MsgKind::Synced => "SYNCED",
            MsgKind::Data => "DATA",
            MsgKind::DataAck => "DATA_ACK",
            MsgKind::Sleep => "SLEEP",
            MsgKind::NodeFail => "NODEFAIL",
            MsgKind::NodeFailAck => "NODEFAIL_ACK",
        }
    }

    pub fn is_broadcast(self) -> bool {
        matches!(self, MsgKind::Ndm | MsgKind::Nbm | MsgKind::Sync | MsgKind::Sleep)
    }

    pub fn has_mac_timestamp(self) -> bool {
        matches!(self, MsgKind::Sync | MsgKind::Sleep)
    }

    fn code(self) -> u8 {
        self as u8
    }

    fn from_code(c: u8) -> Option<Self> {
        Self::ALL.get(usize::from(c)).copied()
    }
}

impl fmt::Display for MsgKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MsgKind {
    type Err = WireError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| WireError::Invalid(format!("unknown message kind {s:?}")))
    }
}

/// Neighbour broadcast: an origin's admitted neighbours and their edge
/// weights, flooded towards the sink.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbmPayload {
    pub origin: NodeId,
    /// `(neighbour, weight)` with the weight in hundredths.
    pub neighbours: Vec<(NodeId, u32)>,
    /// Remaining capacity of the origin, mAh.
    pub capacity: f64,
}

impl NbmPayload {
    pub fn weight(centi: u32) -> f64 {
        f64::from(centi) / 100.0
    }

    /// Rounds a weight to the on-air resolution, saturating at `u32::MAX`.
    pub fn to_centi(weight: f64) -> u32 {
        let c = (weight * 100.0).round();
        if c >= f64::from(u32::MAX) {
            u32::MAX
        } else if c <= 0.0 {
            0
        } else {
            c as u32
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    Ndm { index: u16, total: u16, capacity: f64 },
    Nbm(NbmPayload),
    NbmAck { origin: NodeId },
    Cdm { epoch: u32, parents: Vec<(NodeId, NodeId)> },
    CdmAck { epoch: u32 },
    Sync { trigger: Option<u64> },
    Synced,
    Data { slot: u32, more: bool, readings: Vec<(NodeId, SensorReading)> },
    DataAck { slot: u32, acked: u32 },
    Sleep { slot: u32 },
    NodeFail { failed: NodeId, reporter: NodeId },
    NodeFailAck { failed: NodeId, acked: u32 },
}

impl Payload {
    pub fn kind(&self) -> MsgKind {
        match self {
            Payload::Ndm { .. } => MsgKind::Ndm,
            Payload::Nbm(_) => MsgKind::Nbm,
            Payload::NbmAck { .. } => MsgKind::NbmAck,
            Payload::Cdm { .. } => MsgKind::Cdm,
            Payload::CdmAck { .. } => MsgKind::CdmAck,
            Payload::Sync { .. } => MsgKind::Sync,
            Payload::Synced => MsgKind::Synced,
            Payload::Data { .. } => MsgKind::Data,
            Payload::DataAck { .. } => MsgKind::DataAck,
            Payload::Sleep { .. } => MsgKind::Sleep,
            Payload::NodeFail { .. } => MsgKind::NodeFail,
            Payload::NodeFailAck { .. } => MsgKind::NodeFailAck,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub src: NodeId,
    pub dst: NodeId,
    pub seq: u32,
    /// Sender's estimate of global time at transmission, µs.
    pub mac_timestamp: Option<u64>,
    pub payload: Payload,
}

impl Message {
    pub fn kind(&self) -> MsgKind {
        self.payload.kind()
    }

    pub fn is_broadcast(&self) -> bool {
        self.dst == BROADCAST
    }

    /// Checks the addressing and timestamp rules of the frame kind.
    pub fn validate(&self) -> Result<(), WireError> {
        let kind = self.kind();
        if self.src == BROADCAST {
            return Err(WireError::Invalid("source cannot be the broadcast address".into()));
        }
        if kind.is_broadcast() != self.is_broadcast() {
            return Err(WireError::Invalid(format!("{kind} has the wrong addressing mode")));
        }
        if kind.has_mac_timestamp() != self.mac_timestamp.is_some() {
            return Err(WireError::Invalid(format!("{kind} MAC timestamp presence mismatch")));
        }
        let too_long = match &self.payload {
            Payload::Nbm(p) => p.neighbours.len() > MAX_LIST_LEN,
            Payload::Cdm { parents, .. } => parents.len() > MAX_LIST_LEN,
            Payload::Data { readings, .. } => readings.len() > MAX_LIST_LEN,
            _ => false,
        };
        if too_long {
            return Err(WireError::Invalid("list longer than the frame limit".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WireError {
    #[error("frame truncated")]
    Truncated,
    #[error("unsupported wire version {0}")]
    BadVersion(u8),
    #[error("unknown message kind code {0}")]
    UnknownKind(u8),
    #[error("{0} trailing bytes after frame")]
    TrailingBytes(usize),
    #[error("invalid frame: {0}")]
    Invalid(String),
}

// ===========================================================================
// Encoding

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_be_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_be_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_be_bytes());
    }
    fn f32(&mut self, v: f32) {
        self.u32(v.to_bits());
    }
    fn f64(&mut self, v: f64) {
        self.u64(v.to_bits());
    }
    fn node(&mut self, v: NodeId) {
        self.u16(v.0);
    }
    fn len(&mut self, n: usize) {
        self.u16(n as u16);
    }
}

/// Serializes a message. Callers should [`Message::validate`] first; the
/// encoder itself does not reject malformed frames.
pub fn encode(msg: &Message) -> Vec<u8> {
    let mut w = Writer(Vec::with_capacity(32));
    w.u8(WIRE_VERSION);
    w.u8(msg.kind().code());
    w.node(msg.src);
    w.node(msg.dst);
    w.u32(msg.seq);
    w.u8(u8::from(msg.mac_timestamp.is_some()));
    if let Some(ts) = msg.mac_timestamp {
        w.u64(ts);
    }
    match &msg.payload {
        Payload::Ndm { index, total, capacity } => {
            w.u16(*index);
            w.u16(*total);
            w.f64(*capacity);
        }
        Payload::Nbm(p) => {
            w.node(p.origin);
            w.len(p.neighbours.len());
            for &(n, c) in &p.neighbours {
                w.node(n);
                w.u32(c);
            }
            w.f64(p.capacity);
        }
        Payload::NbmAck { origin } => w.node(*origin),
        Payload::Cdm { epoch, parents } => {
            w.u32(*epoch);
            w.len(parents.len());
            for &(c, p) in parents {
                w.node(c);
                w.node(p);
            }
        }
        Payload::CdmAck { epoch } => w.u32(*epoch),
        Payload::Sync { trigger } => match trigger {
            Some(t) => {
                w.u8(1);
                w.u64(*t);
            }
            None => w.u8(0),
        },
        Payload::Synced => {}
        Payload::Data { slot, more, readings } => {
            w.u32(*slot);
            w.u8(u8::from(*more));
            w.len(readings.len());
            for (origin, r) in readings {
                w.node(*origin);
                w.f32(r.soil_moisture);
                w.f32(r.soil_temp);
                w.f32(r.air_temp);
                w.f32(r.rel_humidity);
                w.f64(r.battery_mv);
            }
        }
        Payload::DataAck { slot, acked } => {
            w.u32(*slot);
            w.u32(*acked);
        }
        Payload::Sleep { slot } => w.u32(*slot),
        Payload::NodeFail { failed, reporter } => {
            w.node(*failed);
            w.node(*reporter);
        }
        Payload::NodeFailAck { failed, acked } => {
            w.node(*failed);
            w.u32(*acked);
        }
    }
    w.0
}

// ===========================================================================
// Decoding

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], WireError> {
        if self.buf.len() < N {
            return Err(WireError::Truncated);
        }
        let (head, rest) = self.buf.split_at(N);
        self.buf = rest;
        Ok(head.try_into().expect("length checked"))
    }
    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take::<1>()?[0])
    }
    fn u16(&mut self) -> Result<u16, WireError> {
        Ok(u16::from_be_bytes(self.take()?))
    }
    fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_be_bytes(self.take()?))
    }
    fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_be_bytes(self.take()?))
    }
    fn f32(&mut self) -> Result<f32, WireError> {
        Ok(f32::from_bits(self.u32()?))
    }
    fn f64(&mut self) -> Result<f64, WireError> {
        Ok(f64::from_bits(self.u64()?))
    }
    fn node(&mut self) -> Result<NodeId, WireError> {
        Ok(NodeId(self.u16()?))
    }
    fn flag(&mut self) -> Result<bool, WireError> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(WireError::Invalid(format!("flag byte {b}"))),
        }
    }
    fn len(&mut self, item_size: usize) -> Result<usize, WireError> {
        let n = usize::from(self.u16()?);
        if n > MAX_LIST_LEN {
            return Err(WireError::Invalid(format!("list length {n}")));
        }
        if self.buf.len() < n * item_size {
            return Err(WireError::Truncated);
        }
        Ok(n)
    }
}

pub fn decode(bytes: &[u8]) -> Result<Message, WireError> {
    let mut r = Reader { buf: bytes };
    let version = r.u8()?;
    if version != WIRE_VERSION {
        return Err(WireError::BadVersion(version));
    }
    let code = r.u8()?;
    let kind = MsgKind::from_code(code).ok_or(WireError::UnknownKind(code))?;
    let src = r.node()?;
    let dst = r.node()?;
    let seq = r.u32()?;
    let mac_timestamp = if r.flag()? { Some(r.u64()?) } else { None };
    let payload = match kind {
        MsgKind::Ndm => Payload::Ndm {
            index: r.u16()?,
            total: r.u16()?,
            capacity: r.f64()?,
        },
        MsgKind::Nbm => {
            let origin = r.node()?;
            let n = r.len(6)?;
            let mut neighbours = Vec::with_capacity(n);
            for _ in 0..n {
                neighbours.push((r.node()?, r.u32()?));
            }
            Payload::Nbm(NbmPayload {
                origin,
                neighbours,
                capacity: r.f64()?,
            })
        }
        MsgKind::NbmAck => Payload::NbmAck { origin: r.node()? },
        MsgKind::Cdm => {
            let epoch = r.u32()?;
            let n = r.len(4)?;
            let mut parents = Vec::with_capacity(n);
            for _ in 0..n {
                parents.push((r.node()?, r.node()?));
            }
            Payload::Cdm { epoch, parents }
        }
        MsgKind::CdmAck => Payload::CdmAck { epoch: r.u32()? },
        MsgKind::Sync => Payload::Sync {
            trigger: if r.flag()? { Some(r.u64()?) } else { None },
        },
        MsgKind::Synced => Payload::Synced,
        MsgKind::Data => {
            let slot = r.u32()?;
            let more = r.flag()?;
            let n = r.len(26)?;
            let mut readings = Vec::with_capacity(n);
            for _ in 0..n {
                let origin = r.node()?;
                readings.push((
                    origin,
                    SensorReading {
                        soil_moisture: r.f32()?,
                        soil_temp: r.f32()?,
                        air_temp: r.f32()?,
                        rel_humidity: r.f32()?,
                        battery_mv: r.f64()?,
                    },
                ));
            }
            Payload::Data { slot, more, readings }
        }
        MsgKind::DataAck => Payload::DataAck {
            slot: r.u32()?,
            acked: r.u32()?,
        },
        MsgKind::Sleep => Payload::Sleep { slot: r.u32()? },
        MsgKind::NodeFail => Payload::NodeFail {
            failed: r.node()?,
            reporter: r.node()?,
        },
        MsgKind::NodeFailAck => Payload::NodeFailAck {
            failed: r.node()?,
            acked: r.u32()?,
        },
    };
    if !r.buf.is_empty() {
        return Err(WireError::TrailingBytes(r.buf.len()));
    }
    let msg = Message {
        src,
        dst,
        seq,
        mac_timestamp,
        payload,
    };
    msg.validate()?;
    Ok(msg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reading(mv: f64) -> SensorReading {
        SensorReading {
            soil_moisture: 18.5,
            soil_temp: 24.0,
            air_temp: 27.25,
            rel_humidity: 61.0,
            battery_mv: mv,
        }
    }

    fn samples() -> Vec<Message> {
        let n = NodeId;
        vec![
            Message {
                src: n(3),
                dst: BROADCAST,
                seq: 1,
                mac_timestamp: None,
                payload: Payload::Ndm { index: 0, total: 60, capacity: 2200.0 },
            },
            Message {
                src: n(7),
                dst: BROADCAST,
                seq: 2,
                mac_timestamp: None,
                payload: Payload::Nbm(NbmPayload {
                    origin: n(7),
                    neighbours: vec![(n(1), 31_000), (n(4), 2_043_512)],
                    capacity: 2187.25,
                }),
            },
            Message {
                src: n(4),
                dst: n(7),
                seq: 3,
                mac_timestamp: None,
                payload: Payload::NbmAck { origin: n(7) },
            },
            Message {
                src: n(1),
                dst: n(2),
                seq: 4,
                mac_timestamp: None,
                payload: Payload::Cdm {
                    epoch: 1,
                    parents: vec![(n(2), n(1)), (n(3), n(2))],
                },
            },
            Message {
                src: n(1),
                dst: BROADCAST,
                seq: 5,
                mac_timestamp: Some(123_456_789),
                payload: Payload::Sync { trigger: Some(999_000_000) },
            },
            Message {
                src: n(2),
                dst: n(1),
                seq: 6,
                mac_timestamp: None,
                payload: Payload::Synced,
            },
            Message {
                src: n(3),
                dst: n(2),
                seq: 7,
                mac_timestamp: None,
                payload: Payload::Data {
                    slot: 4,
                    more: true,
                    readings: vec![(n(3), reading(3712.5)), (n(9), reading(3650.125))],
                },
            },
            Message {
                src: n(2),
                dst: n(3),
                seq: 8,
                mac_timestamp: None,
                payload: Payload::DataAck { slot: 4, acked: 7 },
            },
            Message {
                src: n(2),
                dst: BROADCAST,
                seq: 9,
                mac_timestamp: Some(42),
                payload: Payload::Sleep { slot: 4 },
            },
            Message {
                src: n(5),
                dst: n(2),
                seq: 10,
                mac_timestamp: None,
                payload: Payload::NodeFail { failed: n(11), reporter: n(5) },
            },
            Message {
                src: n(2),
                dst: n(5),
                seq: 11,
                mac_timestamp: None,
                payload: Payload::NodeFailAck { failed: n(11), acked: 10 },
            },
            Message {
                src: n(2),
                dst: n(1),
                seq: 12,
                mac_timestamp: None,
                payload: Payload::CdmAck { epoch: 1 },
            },
        ]
    }

    #[test]
    fn round_trip_every_kind() {
        let msgs = samples();
        assert_eq!(msgs.len(), MsgKind::ALL.len());
        for m in msgs {
            m.validate().unwrap();
            assert_eq!(decode(&encode(&m)).unwrap(), m, "{}", m.kind());
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for k in MsgKind::ALL {
            assert_eq!(k.name().parse::<MsgKind>().unwrap(), k);
        }
        assert!("PING".parse::<MsgKind>().is_err());
    }

    #[test]
    fn addressing_rules() {
        let mut m = samples().remove(0);
        m.dst = NodeId(2);
        assert!(m.validate().is_err());
        let mut s = samples().remove(4);
        s.mac_timestamp = None;
        assert!(s.validate().is_err());
        let mut d = samples().remove(6);
        d.dst = BROADCAST;
        assert!(d.validate().is_err());
    }

    #[test]
    fn malformed_frames() {
        let good = encode(&samples()[6]);
        for cut in 0..good.len() {
            assert!(decode(&good[..cut]).is_err(), "prefix {cut}");
        }
        let mut extra = good.clone();
        extra.push(0);
        assert_eq!(decode(&extra), Err(WireError::TrailingBytes(1)));
        let mut version = good.clone();
        version[0] = 9;
        assert_eq!(decode(&version), Err(WireError::BadVersion(9)));
        let mut kind = good;
        kind[1] = 200;
        assert_eq!(decode(&kind), Err(WireError::UnknownKind(200)));
    }

    #[test]
    fn fixed_point_weights() {
        assert_eq!(NbmPayload::to_centi(310.0), 31_000);
        assert_eq!(NbmPayload::to_centi(440.004), 44_000);
        assert_eq!(NbmPayload::to_centi(1e12), u32::MAX);
        assert_eq!(NbmPayload::weight(44_001), 440.01);
    }

    proptest! {
        #[test]
        fn decode_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..200)) {
            let _ = decode(&bytes);
        }

        #[test]
        fn data_round_trip(
            slot in any::<u32>(),
            more in any::<bool>(),
            mvs in proptest::collection::vec(2500.0f64..4300.0, 0..20),
        ) {
            let m = Message {
                src: NodeId(4),
                dst: NodeId(1),
                seq: 77,
                mac_timestamp: None,
                payload: Payload::Data {
                    slot,
                    more,
                    readings: mvs.iter().enumerate().map(|(i, &mv)| (NodeId(i as u16 + 2), reading(mv))).collect(),
                },
            };
            prop_assert_eq!(decode(&encode(&m)).unwrap(), m);
        }
    }
}
