//! # fieldnet
//!
//! Deterministic discrete-event simulator and protocol library for
//! synchronized, shortest-path-tree, duty-cycled sensor network data
//! collection.
//!
//! The crate is organised bottom-up:
//! - [`model`]: node ids, the edge-weight formula, network graphs, Dijkstra
//!   shortest-path trees and their text export.
//! - [`link`]: log-distance radio model and RSSI tiering.
//! - [`clock`]: drifting hardware clocks and regression skew estimation.
//! - [`energy`]: Li-ion SOC/OCV curve, drain and solar charge.
//! - [`wire`]: protocol messages and their binary encoding.
//! - [`protocol`]: the per-node state machine and sink logic.
//! - [`engine`]: event queue, scenarios, traces, snoopers and the runner.
//! - [`analysis`]: trace analyzers (yield, census, dualloss, energy,
//!   graph diff, message-bound audit).

pub mod analysis;
pub mod clock;
pub mod energy;
pub mod engine;
pub mod link;
pub mod model;
pub mod protocol;
pub mod wire;

pub use model::{CollectionTree, NetworkGraph, NodeId};
