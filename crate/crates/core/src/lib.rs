//! Causality timestamps over communication graphs.
//!
//! The crate bundles three timestamp algorithms with a deterministic
//! discrete-event simulator and a brute-force happened-before oracle that
//! checks them:
//!
//! - [`vclock`]: classical vector clocks and their strict partial order.
//! - [`star`]: real-valued clocks of length `n - 1` for star graphs.
//! - [`inline`]: cover-based inline timestamps whose `next` fields are
//!   resolved by control messages, with blocking query semantics.
//!
//! [`graph`] computes vertex covers, connectivity and cut facts;
//! [`execution`] holds the event-DAG model and the oracle; [`sim`] runs
//! scenario scripts, generates adversarial executions, and sweeps every
//! timestamp an algorithm emits against the oracle.

pub mod execution;
pub mod graph;
pub mod inline;
pub mod rat;
pub mod sim;
pub mod star;
pub mod vclock;

pub use execution::{Event, EventId, EventKind, ExecutionTrace, MessageId, TraceError};
pub use graph::{CommunicationGraph, CoverMode, CoverSet, GraphError, ProcessId};
pub use inline::{ControlMessage, InlineError, InlineTimestamp, NextEntry};
pub use rat::Rat;
pub use vclock::{vc_leq, vc_less, vc_step, ClockError, VectorTimestamp};
