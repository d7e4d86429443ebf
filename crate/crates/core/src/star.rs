//! Real-valued vector clocks of length `n - 1` for star graphs.
//!
//! The central process keeps its slots strictly between consecutive
//! integers while each radial process pins its own slot to integers, so
//! timestamps stay pairwise distinct with one fewer slot than the
//! classical clock needs. The central update may pick any value in the
//! open interval `(w[j], floor(w[j]) + 1)`; this implementation picks the
//! midpoint deterministically, so denominators are powers of two and grow
//! with execution length.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rat::Rat;
use crate::vclock::VectorTimestamp;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StarError {
    #[error("vector length {0} does not match {1} radial slots")]
    BadLength(usize, usize),
    #[error("star clock needs at least 3 processes, got {0}")]
    TooFewProcesses(usize),
    #[error("radial slot {0} out of range 1..={1}")]
    BadRadialSlot(usize, usize),
    #[error("piggyback present on a non-receive event or missing on a receive")]
    PiggybackMismatch,
}

/// Which part a process plays in the star. Radial slots are numbered
/// `1..=n-1`, matching the vector slot the process owns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StarRole {
    Central,
    Radial(usize),
}

/// Kind of local event as seen by an online clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    Send,
    Receive,
    Compute,
}

/// One application of the update function to a vector of length `n - 1`.
///
/// A radial process bumps its own slot to the smallest integer strictly
/// above the current value; the central process moves every slot to the
/// midpoint of the open interval between its value and the next integer.
pub fn star_update(
    role: StarRole,
    w: &VectorTimestamp,
    n: usize,
) -> Result<VectorTimestamp, StarError> {
    if n < 3 {
        return Err(StarError::TooFewProcesses(n));
    }
    if w.len() != n - 1 {
        return Err(StarError::BadLength(w.len(), n - 1));
    }
    let mut out = w.clone();
    match role {
        StarRole::Radial(k) => {
            if k == 0 || k > n - 1 {
                return Err(StarError::BadRadialSlot(k, n - 1));
            }
            let slot = k - 1;
            out.set(slot, Rat::from_int(w.get(slot).next_integer()));
        }
        StarRole::Central => {
            for j in 0..out.len() {
                let v = w.get(j);
                out.set(j, v.midpoint(Rat::from_int(v.next_integer())));
            }
        }
    }
    Ok(out)
}

/// Per-process state of the star clock.
#[derive(Debug, Clone)]
pub struct StarClock {
    role: StarRole,
    n: usize,
    state: VectorTimestamp,
}

impl StarClock {
    pub fn new(role: StarRole, n: usize) -> Result<StarClock, StarError> {
        if n < 3 {
            return Err(StarError::TooFewProcesses(n));
        }
        if let StarRole::Radial(k) = role {
            if k == 0 || k > n - 1 {
                return Err(StarError::BadRadialSlot(k, n - 1));
            }
        }
        Ok(StarClock {
            role,
            n,
            state: VectorTimestamp::zeros(n - 1),
        })
    }

    pub fn role(&self) -> StarRole {
        self.role
    }

    pub fn state(&self) -> &VectorTimestamp {
        &self.state
    }

    /// Processes one local event: merge the piggybacked vector on a
    /// receive, apply the update, and return the event timestamp plus the
    /// piggyback to attach on a send.
    pub fn on_event(
        &mut self,
        kind: StepKind,
        piggyback: Option<&VectorTimestamp>,
    ) -> Result<(VectorTimestamp, Option<VectorTimestamp>), StarError> {
        match (kind, piggyback) {
            (StepKind::Receive, Some(incoming)) => {
                if incoming.len() != self.state.len() {
                    return Err(StarError::BadLength(incoming.len(), self.state.len()));
                }
                self.state
                    .merge_max(incoming)
                    .map_err(|_| StarError::BadLength(incoming.len(), self.state.len()))?;
            }
            (StepKind::Receive, None) | (StepKind::Send | StepKind::Compute, Some(_)) => {
                return Err(StarError::PiggybackMismatch);
            }
            _ => {}
        }
        self.state = star_update(self.role, &self.state, self.n)?;
        let stamp = self.state.clone();
        let out = matches!(kind, StepKind::Send).then(|| stamp.clone());
        Ok((stamp, out))
    }
}
