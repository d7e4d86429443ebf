//! Vector timestamps and their strict partial order.
//!
//! One representation serves both the classical integer-valued vector
//! clock and the real-valued star-graph clock: elements are exact
//! rationals. `TrackedClock` is the per-process driver parameterized by
//! which slot (if any) the process owns; the cover-based inline algorithm
//! reuses it with cover slots only.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rat::Rat;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClockError {
    #[error("vector length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("slot {0} out of range for vector of length {1}")]
    SlotOutOfRange(usize, usize),
}

/// Fixed-length vector of exact rationals, ordered by the usual
/// element-wise partial order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VectorTimestamp(Vec<Rat>);

impl VectorTimestamp {
    pub fn zeros(len: usize) -> VectorTimestamp {
        VectorTimestamp(vec![Rat::ZERO; len])
    }

    pub fn from_elems(elems: Vec<Rat>) -> VectorTimestamp {
        VectorTimestamp(elems)
    }

    pub fn from_ints(elems: &[i64]) -> VectorTimestamp {
        VectorTimestamp(elems.iter().map(|&e| Rat::from_int(e)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> Rat {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, v: Rat) {
        self.0[i] = v;
    }

    pub fn elems(&self) -> &[Rat] {
        &self.0
    }

    /// Element-wise maximum, in place.
    pub fn merge_max(&mut self, other: &VectorTimestamp) -> Result<(), ClockError> {
        check_len(self, other)?;
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            *a = (*a).max(*b);
        }
        Ok(())
    }
}

impl fmt::Display for VectorTimestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

fn check_len(a: &VectorTimestamp, b: &VectorTimestamp) -> Result<(), ClockError> {
    if a.len() != b.len() {
        return Err(ClockError::LengthMismatch(a.len(), b.len()));
    }
    Ok(())
}

/// Strict order: every element `<=` and at least one `<`.
pub fn vc_less(u: &VectorTimestamp, v: &VectorTimestamp) -> Result<bool, ClockError> {
    Ok(vc_leq(u, v)? && u != v)
}

/// Element-wise `<=` (non-strict, equality allowed).
pub fn vc_leq(u: &VectorTimestamp, v: &VectorTimestamp) -> Result<bool, ClockError> {
    check_len(u, v)?;
    Ok(u.elems().iter().zip(v.elems()).all(|(a, b)| a <= b))
}

/// One step of the classical vector clock: merge the incoming vector (if
/// any) by element-wise max, then increment the own slot. Returns the
/// event's timestamp.
pub fn vc_step(
    state: &VectorTimestamp,
    own: usize,
    incoming: Option<&VectorTimestamp>,
) -> Result<VectorTimestamp, ClockError> {
    if own >= state.len() {
        return Err(ClockError::SlotOutOfRange(own, state.len()));
    }
    let mut next = state.clone();
    if let Some(v) = incoming {
        next.merge_max(v)?;
    }
    next.set(own, next.get(own) + Rat::ONE);
    Ok(next)
}

/// Per-process clock over a tracked subset of processes. A process that
/// owns a slot increments it on every local event; an untracked process
/// only merges. The increment happens before any merge, matching how the
/// cover processes run it; with unique slot ownership the result agrees
/// with merge-then-increment.
#[derive(Debug, Clone)]
pub struct TrackedClock {
    state: VectorTimestamp,
    own: Option<usize>,
}

impl TrackedClock {
    pub fn new(len: usize, own: Option<usize>) -> Result<TrackedClock, ClockError> {
        if let Some(slot) = own {
            if slot >= len {
                return Err(ClockError::SlotOutOfRange(slot, len));
            }
        }
        Ok(TrackedClock {
            state: VectorTimestamp::zeros(len),
            own,
        })
    }

    pub fn state(&self) -> &VectorTimestamp {
        &self.state
    }

    /// Advances the clock for one local event and returns its timestamp.
    pub fn on_event(
        &mut self,
        incoming: Option<&VectorTimestamp>,
    ) -> Result<VectorTimestamp, ClockError> {
        if let Some(slot) = self.own {
            let v = self.state.get(slot);
            self.state.set(slot, v + Rat::ONE);
        }
        if let Some(v) = incoming {
            self.state.merge_max(v)?;
        }
        Ok(self.state.clone())
    }
}
