//! Deterministic discrete-event simulator and its checking harness.
//!
//! [`run`] executes a [`ScenarioScript`] under one of the timestamp
//! algorithms, producing the execution trace, the timestamp log and the
//! answers to scripted queries. [`inline_sweep`] / [`online_sweep`]
//! replay a run's timestamps against the happened-before oracle.
//! `generate` builds the adversarial scenarios (concurrent star sends,
//! network flooding) and seeded random scenarios; `adversary` attacks
//! short online clocks with the star construction.

mod adversary;
mod engine;
mod generate;
mod online;
mod scenario;
mod timeline;

pub use adversary::{star_adversary, AdversaryOutcome, AdversaryReport, Violation, ViolationKind};
pub use engine::{run, run_with, QueryFailure, QueryOutcome, QueryRecord, RunConfig, RunOutput};
pub use generate::{gen_flooding, gen_random, gen_star_concurrent, RandomScenarioConfig};
pub use online::{
    ConstantZero, FullVectorClock, LamportScalar, OnlineClock, OnlineTimestamper, StarVectorClock,
    TruncatedVectorClock,
};
pub use scenario::{
    Action, ActionKind, ControlDelay, CoverSpec, GraphSpec, PairDelay, QuerySpec, ScenarioScript,
};
pub use timeline::{
    inline_sweep, online_sweep, write_once_violations, CaseCounts, CoverCase, Disagreement,
    LogEntry, MutationValue, NextMutation, QueryView, StampValue, SweepReport, TimestampLog,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::execution::TraceError;
use crate::graph::{GraphError, ProcessId};
use crate::inline::InlineError;
use crate::star::StarError;
use crate::vclock::ClockError;

/// Which timestamp algorithm a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    VClock,
    Inline,
    Star,
}

impl std::fmt::Display for Algo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Algo::VClock => "vclock",
            Algo::Inline => "inline",
            Algo::Star => "star",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Script(String),
    #[error("algorithm/topology mismatch: {0}")]
    AlgorithmTopologyMismatch(String),
    #[error("candidate vector length {len} exceeds n-2 = {max}")]
    CandidateVectorTooLong { len: usize, max: usize },
    #[error("process {0} is not usable here: {1}")]
    BadProcess(ProcessId, String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Inline(#[from] InlineError),
    #[error(transparent)]
    Star(#[from] StarError),
    #[error(transparent)]
    Clock(#[from] ClockError),
}
