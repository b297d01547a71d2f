//! Discrete-event engine: scenarios, the event queue, seeded random
//! streams, traces, snoopers and the run loop.

pub mod queue;
pub mod rng;
pub mod runner;
pub mod scenario;
pub mod snoop;
pub mod trace;

pub use queue::EventQueue;
pub use runner::{run, RunOutput};
pub use scenario::{Scenario, ScenarioError, ValidationError};
pub use trace::{parse_line, parse_trace, write_trace, EventKind, Trace, TraceError, TraceRecord};
