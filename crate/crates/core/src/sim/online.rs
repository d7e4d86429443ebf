//! The online-clock interface and its built-in implementations.
//!
//! An online algorithm finalizes each event's timestamp at the event
//! itself. The simulator drives the real algorithms (full vector clock,
//! star clock) and the deliberately-too-short adversary candidates
//! (truncated vector clock, Lamport scalar, constant zero) through the
//! same two traits, so the lower-bound construction can attack anything
//! that fits.

use crate::graph::{CommunicationGraph, ProcessId};
use crate::rat::Rat;
use crate::star::{StarClock, StarRole, StepKind};
use crate::vclock::VectorTimestamp;

use super::SimError;

/// Per-process clock state: consumes local events, yields the event
/// timestamp and the vector to piggyback on sends.
pub trait OnlineClock {
    fn on_event(
        &mut self,
        kind: StepKind,
        piggyback: Option<&VectorTimestamp>,
    ) -> Result<(VectorTimestamp, Option<VectorTimestamp>), SimError>;
}

/// Factory for per-process clocks of one algorithm.
pub trait OnlineTimestamper {
    fn name(&self) -> String;
    /// Length of the vectors this algorithm emits for an `n`-process
    /// system.
    fn vector_len(&self, n: usize) -> usize;
    fn make(
        &self,
        n: usize,
        proc: ProcessId,
        graph: &CommunicationGraph,
    ) -> Result<Box<dyn OnlineClock>, SimError>;
}

fn piggyback_guard(kind: StepKind, piggyback: Option<&VectorTimestamp>) -> Result<(), SimError> {
    let ok = matches!(kind, StepKind::Receive) == piggyback.is_some();
    if ok {
        Ok(())
    } else {
        Err(SimError::Script(
            "piggyback must be present exactly on receive events".into(),
        ))
    }
}

/// The classical vector clock over all `n` processes.
pub struct FullVectorClock;

struct FullVcState {
    state: VectorTimestamp,
    own: usize,
}

impl OnlineClock for FullVcState {
    fn on_event(
        &mut self,
        kind: StepKind,
        piggyback: Option<&VectorTimestamp>,
    ) -> Result<(VectorTimestamp, Option<VectorTimestamp>), SimError> {
        piggyback_guard(kind, piggyback)?;
        if let Some(v) = piggyback {
            self.state.merge_max(v)?;
        }
        self.state
            .set(self.own, self.state.get(self.own) + Rat::ONE);
        let stamp = self.state.clone();
        let out = matches!(kind, StepKind::Send).then(|| stamp.clone());
        Ok((stamp, out))
    }
}

impl OnlineTimestamper for FullVectorClock {
    fn name(&self) -> String {
        "vclock".into()
    }

    fn vector_len(&self, n: usize) -> usize {
        n
    }

    fn make(
        &self,
        n: usize,
        proc: ProcessId,
        _graph: &CommunicationGraph,
    ) -> Result<Box<dyn OnlineClock>, SimError> {
        Ok(Box::new(FullVcState {
            state: VectorTimestamp::zeros(n),
            own: proc.0,
        }))
    }
}

/// Returns the center of a strict star graph: one vertex adjacent to all
/// others, every other vertex of degree 1, at least three processes.
pub fn star_center(graph: &CommunicationGraph) -> Option<ProcessId> {
    let n = graph.process_count();
    if n < 3 || graph.edge_count() != n - 1 {
        return None;
    }
    let center = graph.processes().find(|&p| graph.degree(p) == n - 1)?;
    graph
        .processes()
        .all(|p| p == center || graph.degree(p) == 1)
        .then_some(center)
}

/// The length `n - 1` real-valued star-graph clock.
pub struct StarVectorClock;

struct StarState(StarClock);

impl OnlineClock for StarState {
    fn on_event(
        &mut self,
        kind: StepKind,
        piggyback: Option<&VectorTimestamp>,
    ) -> Result<(VectorTimestamp, Option<VectorTimestamp>), SimError> {
        Ok(self.0.on_event(kind, piggyback)?)
    }
}

impl OnlineTimestamper for StarVectorClock {
    fn name(&self) -> String {
        "star".into()
    }

    fn vector_len(&self, n: usize) -> usize {
        n - 1
    }

    fn make(
        &self,
        n: usize,
        proc: ProcessId,
        graph: &CommunicationGraph,
    ) -> Result<Box<dyn OnlineClock>, SimError> {
        let center = star_center(graph).ok_or_else(|| {
            SimError::AlgorithmTopologyMismatch(
                "the star algorithm requires a star graph with at least 3 processes".into(),
            )
        })?;
        let role = if proc == center {
            StarRole::Central
        } else {
            // Radials take slots 1..n-1 in id order.
            let slot = graph
                .processes()
                .filter(|&p| p != center)
                .position(|p| p == proc)
                .expect("process exists")
                + 1;
            StarRole::Radial(slot)
        };
        Ok(Box::new(StarState(StarClock::new(role, n)?)))
    }
}

/// A vector clock keeping only the first `s` coordinates; processes
/// whose coordinate is cut off never increment anything. Deliberately
/// too short: the adversary construction defeats it.
pub struct TruncatedVectorClock {
    pub s: usize,
}

struct TruncatedState {
    state: VectorTimestamp,
    own: Option<usize>,
}

impl OnlineClock for TruncatedState {
    fn on_event(
        &mut self,
        kind: StepKind,
        piggyback: Option<&VectorTimestamp>,
    ) -> Result<(VectorTimestamp, Option<VectorTimestamp>), SimError> {
        piggyback_guard(kind, piggyback)?;
        if let Some(v) = piggyback {
            self.state.merge_max(v)?;
        }
        if let Some(own) = self.own {
            self.state.set(own, self.state.get(own) + Rat::ONE);
        }
        let stamp = self.state.clone();
        let out = matches!(kind, StepKind::Send).then(|| stamp.clone());
        Ok((stamp, out))
    }
}

impl OnlineTimestamper for TruncatedVectorClock {
    fn name(&self) -> String {
        format!("truncated-vclock:{}", self.s)
    }

    fn vector_len(&self, _n: usize) -> usize {
        self.s
    }

    fn make(
        &self,
        _n: usize,
        proc: ProcessId,
        _graph: &CommunicationGraph,
    ) -> Result<Box<dyn OnlineClock>, SimError> {
        Ok(Box::new(TruncatedState {
            state: VectorTimestamp::zeros(self.s),
            own: (proc.0 < self.s).then_some(proc.0),
        }))
    }
}

/// Lamport's scalar clock viewed as a length-1 vector.
pub struct LamportScalar;

struct LamportState(i64);

impl OnlineClock for LamportState {
    fn on_event(
        &mut self,
        kind: StepKind,
        piggyback: Option<&VectorTimestamp>,
    ) -> Result<(VectorTimestamp, Option<VectorTimestamp>), SimError> {
        piggyback_guard(kind, piggyback)?;
        if let Some(v) = piggyback {
            self.0 = self.0.max(v.get(0).floor());
        }
        self.0 += 1;
        let stamp = VectorTimestamp::from_ints(&[self.0]);
        let out = matches!(kind, StepKind::Send).then(|| stamp.clone());
        Ok((stamp, out))
    }
}

impl OnlineTimestamper for LamportScalar {
    fn name(&self) -> String {
        "lamport-scalar".into()
    }

    fn vector_len(&self, _n: usize) -> usize {
        1
    }

    fn make(
        &self,
        _n: usize,
        _proc: ProcessId,
        _graph: &CommunicationGraph,
    ) -> Result<Box<dyn OnlineClock>, SimError> {
        Ok(Box::new(LamportState(0)))
    }
}

/// Emits the zero vector for every event. Breaks distinctness
/// immediately; kept as the simplest conforming-shape candidate.
pub struct ConstantZero;

struct ZeroState;

impl OnlineClock for ZeroState {
    fn on_event(
        &mut self,
        kind: StepKind,
        piggyback: Option<&VectorTimestamp>,
    ) -> Result<(VectorTimestamp, Option<VectorTimestamp>), SimError> {
        piggyback_guard(kind, piggyback)?;
        let stamp = VectorTimestamp::zeros(1);
        let out = matches!(kind, StepKind::Send).then(|| stamp.clone());
        Ok((stamp, out))
    }
}

impl OnlineTimestamper for ConstantZero {
    fn name(&self) -> String {
        "zero".into()
    }

    fn vector_len(&self, _n: usize) -> usize {
        1
    }

    fn make(
        &self,
        _n: usize,
        _proc: ProcessId,
        _graph: &CommunicationGraph,
    ) -> Result<Box<dyn OnlineClock>, SimError> {
        Ok(Box::new(ZeroState))
    }
}
