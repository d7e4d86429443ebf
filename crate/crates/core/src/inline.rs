//! Cover-based inline timestamps.
//!
//! Events at cover processes carry a plain vector clock restricted to the
//! cover (`c` slots). Events elsewhere carry `(id, index, vect, next)`:
//! `vect` snapshots the cover clock, and `next[j]` will eventually hold
//! the index of the earliest receive at cover member `j` caused directly
//! by a message this process sent at-or-after the event. Until the first
//! qualifying send occurs the slot is infinity; from the send until the
//! cover member's control message arrives the slot is pending, and
//! queries on the event block. Once finite, a slot never changes.
//!
//! Control messages travel on a FIFO channel per (cover member, sender)
//! pair, carrying (send index, receive index). Application channels may
//! reorder, so one control can resolve several outstanding send batches
//! at once: a control for send `s` settles every batch with send index
//! `<= s`. Because controls arrive in the cover member's receive order,
//! the first control that covers an event carries the smallest qualifying
//! receive index, which keeps the write-once rule sound without ever
//! revising a finite slot.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{CommunicationGraph, CoverSet, ProcessId};
use crate::rat::Rat;
use crate::vclock::{vc_leq, vc_less, ClockError, TrackedClock, VectorTimestamp};

/// State of one `next` slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NextEntry {
    Finite(u32),
    Infinity,
    Pending,
}

impl NextEntry {
    pub fn is_pending(&self) -> bool {
        matches!(self, NextEntry::Pending)
    }
}

impl fmt::Display for NextEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NextEntry::Finite(k) => write!(f, "{k}"),
            NextEntry::Infinity => write!(f, "inf"),
            NextEntry::Pending => write!(f, "pending"),
        }
    }
}

impl Serialize for NextEntry {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            NextEntry::Finite(k) => s.serialize_u32(*k),
            NextEntry::Infinity => s.serialize_str("inf"),
            NextEntry::Pending => s.serialize_str("pending"),
        }
    }
}

impl<'de> Deserialize<'de> for NextEntry {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<NextEntry, D::Error> {
        use serde::de::Error;
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Wire {
            Number(u32),
            Text(String),
        }
        match Wire::deserialize(d)? {
            Wire::Number(k) => Ok(NextEntry::Finite(k)),
            Wire::Text(s) if s == "inf" => Ok(NextEntry::Infinity),
            Wire::Text(s) if s == "pending" => Ok(NextEntry::Pending),
            Wire::Text(s) => Err(D::Error::custom(format!("bad next entry `{s}`"))),
        }
    }
}

/// An inline timestamp as returned by queries.
///
/// `Cover` stamps carry exactly `c` scalar elements; `NonCover` stamps
/// carry `2c + 2` in the default configuration (id, index, `c` vector
/// slots, `c` next slots). Under the neighbor-restricted option the next
/// map only holds slots for cover neighbors; missing slots read as
/// infinity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "WireStamp", try_from = "WireStamp")]
pub enum InlineTimestamp {
    Cover {
        vect: VectorTimestamp,
    },
    NonCover {
        id: ProcessId,
        index: u32,
        vect: VectorTimestamp,
        next: BTreeMap<usize, NextEntry>,
    },
}

impl InlineTimestamp {
    pub fn id(&self) -> Option<ProcessId> {
        match self {
            InlineTimestamp::Cover { .. } => None,
            InlineTimestamp::NonCover { id, .. } => Some(*id),
        }
    }

    pub fn index(&self) -> Option<u32> {
        match self {
            InlineTimestamp::Cover { .. } => None,
            InlineTimestamp::NonCover { index, .. } => Some(*index),
        }
    }

    pub fn vect(&self) -> &VectorTimestamp {
        match self {
            InlineTimestamp::Cover { vect } | InlineTimestamp::NonCover { vect, .. } => vect,
        }
    }

    pub fn cover_size(&self) -> usize {
        self.vect().len()
    }

    /// Value of `next[j]`; slots absent under the neighbor-restricted
    /// option read as infinity.
    pub fn next_at(&self, j: usize) -> NextEntry {
        match self {
            InlineTimestamp::Cover { .. } => NextEntry::Infinity,
            InlineTimestamp::NonCover { next, .. } => {
                next.get(&j).copied().unwrap_or(NextEntry::Infinity)
            }
        }
    }

    pub fn has_pending(&self) -> bool {
        match self {
            InlineTimestamp::Cover { .. } => false,
            InlineTimestamp::NonCover { next, .. } => next.values().any(NextEntry::is_pending),
        }
    }

    /// Number of scalar elements in the timestamp: `c` for cover events,
    /// id + index + vector + next slots for the rest (`2c + 2` in the
    /// default configuration).
    pub fn element_count(&self) -> usize {
        match self {
            InlineTimestamp::Cover { vect } => vect.len(),
            InlineTimestamp::NonCover { vect, next, .. } => 2 + vect.len() + next.len(),
        }
    }
}

impl fmt::Display for InlineTimestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InlineTimestamp::Cover { vect } => write!(f, "{vect}"),
            InlineTimestamp::NonCover {
                id, index, vect, ..
            } => {
                write!(f, "({id},{index},{vect},(")?;
                let c = vect.len();
                for j in 0..c {
                    if j > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{}", self.next_at(j))?;
                }
                write!(f, "))")
            }
        }
    }
}

/// Wire form: `{"id": int|null, "index": int|null, "vect": [...],
/// "next": [...]|null}` with the next array always expanded to length `c`.
#[derive(Serialize, Deserialize)]
struct WireStamp {
    id: Option<usize>,
    index: Option<u32>,
    vect: VectorTimestamp,
    next: Option<Vec<NextEntry>>,
}

impl From<InlineTimestamp> for WireStamp {
    fn from(t: InlineTimestamp) -> WireStamp {
        match &t {
            InlineTimestamp::Cover { vect } => WireStamp {
                id: None,
                index: None,
                vect: vect.clone(),
                next: None,
            },
            InlineTimestamp::NonCover {
                id, index, vect, ..
            } => WireStamp {
                id: Some(id.0),
                index: Some(*index),
                vect: vect.clone(),
                next: Some((0..vect.len()).map(|j| t.next_at(j)).collect()),
            },
        }
    }
}

impl TryFrom<WireStamp> for InlineTimestamp {
    type Error = String;

    fn try_from(w: WireStamp) -> Result<InlineTimestamp, String> {
        match (w.id, w.index, w.next) {
            (None, None, None) => Ok(InlineTimestamp::Cover { vect: w.vect }),
            (Some(id), Some(index), Some(next)) => {
                if next.len() != w.vect.len() {
                    return Err("next length differs from vect length".into());
                }
                Ok(InlineTimestamp::NonCover {
                    id: ProcessId(id),
                    index,
                    vect: w.vect,
                    next: next.into_iter().enumerate().collect(),
                })
            }
            _ => Err("id, index and next must be all present or all absent".into()),
        }
    }
}

/// Metadata carried on every application message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InlinePiggyback {
    pub vect: VectorTimestamp,
    /// Index of the send event, present iff the sender is outside the
    /// cover; its receipt at a cover process triggers a control message.
    pub sender_index: Option<u32>,
}

/// Metadata sent from a cover process back to a non-cover sender over the
/// FIFO control channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlMessage {
    pub from: ProcessId,
    pub to: ProcessId,
    pub send_index: u32,
    pub recv_index: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InlineError {
    #[error("message between two processes outside the cover ({0} -> {1}); the cover is invalid")]
    CoverMismatch(ProcessId, ProcessId),
    #[error("control from {from} out of FIFO order: receive index {recv_index} after {last}")]
    OutOfOrderControl {
        from: ProcessId,
        recv_index: u32,
        last: u32,
    },
    #[error("control from {from} references unknown send index {send_index}")]
    UnknownSendIndex { from: ProcessId, send_index: u32 },
    #[error("unknown event {proc}#{index}")]
    UnknownEvent { proc: ProcessId, index: u32 },
    #[error("query at {now} precedes event {proc}#{index} at {at}")]
    QueryBeforeEvent {
        proc: ProcessId,
        index: u32,
        at: Rat,
        now: Rat,
    },
    #[error("timestamp contains a pending slot; compare only query-ready values")]
    PendingTimestamp,
    #[error("piggyback present on a non-receive event or missing on a receive")]
    PiggybackMismatch,
    #[error("control message delivered to or from the wrong side of the cover")]
    ControlEndpointMismatch,
    #[error(transparent)]
    Clock(#[from] ClockError),
}

/// Partial order on query-ready inline timestamps.
///
/// `a < b` iff one of:
/// (i) same non-cover process and smaller index;
/// (ii) both cover stamps and `a.vect < b.vect`;
/// (iii) `a` cover, `b` not, and `a.vect <= b.vect` element-wise;
/// (iv) `a` non-cover, different id than `b`, and some `next[i]` of `a`
/// is `<=` `b.vect[i]` (an infinite or pending-free absent slot never
/// satisfies this).
pub fn inline_less(a: &InlineTimestamp, b: &InlineTimestamp) -> Result<bool, InlineError> {
    if a.has_pending() || b.has_pending() {
        return Err(InlineError::PendingTimestamp);
    }
    match (a, b) {
        (
            InlineTimestamp::NonCover {
                id: ia, index: na, ..
            },
            InlineTimestamp::NonCover {
                id: ib, index: nb, ..
            },
        ) if ia == ib => Ok(na < nb),
        (InlineTimestamp::Cover { vect: va }, InlineTimestamp::Cover { vect: vb }) => {
            Ok(vc_less(va, vb)?)
        }
        (InlineTimestamp::Cover { vect: va }, InlineTimestamp::NonCover { vect: vb, .. }) => {
            Ok(vc_leq(va, vb)?)
        }
        (InlineTimestamp::NonCover { .. }, _) => {
            let vb = b.vect();
            Ok((0..vb.len()).any(|i| match a.next_at(i) {
                NextEntry::Finite(k) => Rat::from(k) <= vb.get(i),
                NextEntry::Infinity => false,
                NextEntry::Pending => unreachable!("checked above"),
            }))
        }
    }
}

/// Local event kinds fed to the state machine. A receive knows its
/// sender from the channel the message arrived on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InlineEventKind {
    Send { to: ProcessId },
    Receive { from: ProcessId },
    Compute,
}

/// Result of a query on a local event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryResult {
    Ready(InlineTimestamp),
    /// The cover positions listed are awaiting control messages.
    Blocked {
        missing: BTreeSet<usize>,
    },
}

/// Outcome of processing one local event.
#[derive(Debug, Clone)]
pub struct EventOutcome {
    pub timestamp: InlineTimestamp,
    pub piggyback: Option<InlinePiggyback>,
    /// Events whose `next[j]` moved from infinity to pending at this
    /// event's send, as (event index, cover position) pairs.
    pub marked_pending: Vec<(u32, usize)>,
}

/// A `next[j]` slot settled by a control message, as
/// (event index, cover position, receive index).
pub type AppliedNext = (u32, usize, u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct InlineConfig {
    /// Store next slots only for this process's neighbors inside the
    /// cover; other slots stay infinity forever and are dropped.
    pub neighbor_restricted: bool,
}

#[derive(Debug, Clone)]
enum StampCell {
    Cover {
        vect: VectorTimestamp,
    },
    NonCover {
        vect: VectorTimestamp,
        next: BTreeMap<usize, NextEntry>,
    },
}

#[derive(Debug, Clone)]
struct EventRecord {
    at: Rat,
    cell: StampCell,
}

#[derive(Debug, Clone)]
struct PendingBatch {
    send_index: u32,
    /// Indices of local events whose `next[j]` this batch resolves.
    events: Vec<u32>,
}

/// Per-process state of the inline algorithm. Owned by one logical
/// process; the simulator drives all of them single-threaded.
#[derive(Debug, Clone)]
pub struct InlineProcessState {
    proc: ProcessId,
    cover: CoverSet,
    cover_position: Option<usize>,
    clock: TrackedClock,
    history: Vec<EventRecord>,
    /// Cover positions this process may ever send to (all of them in the
    /// default configuration).
    tracked_slots: BTreeSet<usize>,
    pending: Vec<VecDeque<PendingBatch>>,
    sent_to: Vec<BTreeSet<u32>>,
    last_control_recv: Vec<u32>,
}

impl InlineProcessState {
    pub fn new(
        proc: ProcessId,
        cover: &CoverSet,
        graph: &CommunicationGraph,
        config: InlineConfig,
    ) -> InlineProcessState {
        let c = cover.size();
        let cover_position = cover.position(proc);
        let tracked_slots: BTreeSet<usize> = if config.neighbor_restricted {
            graph
                .neighbors(proc)
                .into_iter()
                .filter_map(|q| cover.position(q))
                .collect()
        } else {
            (0..c).collect()
        };
        InlineProcessState {
            proc,
            cover: cover.clone(),
            cover_position,
            clock: TrackedClock::new(c, cover_position).expect("cover position in range"),
            history: Vec::new(),
            tracked_slots,
            pending: vec![VecDeque::new(); c],
            sent_to: vec![BTreeSet::new(); c],
            last_control_recv: vec![0; c],
        }
    }

    pub fn proc(&self) -> ProcessId {
        self.proc
    }

    pub fn in_cover(&self) -> bool {
        self.cover_position.is_some()
    }

    pub fn event_count(&self) -> u32 {
        self.history.len() as u32
    }

    /// Processes the next local event and returns its (initial) timestamp
    /// plus the piggyback for send events.
    pub fn on_event(
        &mut self,
        kind: InlineEventKind,
        at: Rat,
        piggyback: Option<&InlinePiggyback>,
    ) -> Result<EventOutcome, InlineError> {
        match (kind, piggyback) {
            (InlineEventKind::Receive { .. }, Some(_)) => {}
            (InlineEventKind::Receive { .. }, None) => return Err(InlineError::PiggybackMismatch),
            (_, Some(_)) => return Err(InlineError::PiggybackMismatch),
            (_, None) => {}
        }
        if let InlineEventKind::Receive { from } = kind {
            if self.cover_position.is_none() && self.cover.position(from).is_none() {
                return Err(InlineError::CoverMismatch(from, self.proc));
            }
        }
        let index = self.history.len() as u32 + 1;
        let vect = self.clock.on_event(piggyback.map(|p| &p.vect))?;

        let mut marked_pending = Vec::new();
        let cell = if self.cover_position.is_some() {
            StampCell::Cover { vect: vect.clone() }
        } else {
            let next: BTreeMap<usize, NextEntry> = self
                .tracked_slots
                .iter()
                .map(|&j| (j, NextEntry::Infinity))
                .collect();
            StampCell::NonCover {
                vect: vect.clone(),
                next,
            }
        };
        self.history.push(EventRecord { at, cell });

        if let InlineEventKind::Send { to } = kind {
            if self.cover_position.is_none() {
                let j = self
                    .cover
                    .position(to)
                    .ok_or(InlineError::CoverMismatch(self.proc, to))?;
                // The new batch gathers this event and every older local
                // event whose slot j is still unresolved.
                let mut batch = Vec::new();
                for (i, record) in self.history.iter_mut().enumerate() {
                    let StampCell::NonCover { next, .. } = &mut record.cell else {
                        unreachable!("non-cover process has non-cover cells")
                    };
                    let slot = next.get_mut(&j).expect("send target slot is tracked");
                    if *slot == NextEntry::Infinity {
                        *slot = NextEntry::Pending;
                        let idx = i as u32 + 1;
                        batch.push(idx);
                        marked_pending.push((idx, j));
                    }
                }
                self.pending[j].push_back(PendingBatch {
                    send_index: index,
                    events: batch,
                });
                self.sent_to[j].insert(index);
            }
        }

        let piggyback_out = matches!(kind, InlineEventKind::Send { .. }).then(|| InlinePiggyback {
            vect: self.clock.state().clone(),
            sender_index: self.cover_position.is_none().then_some(index),
        });

        Ok(EventOutcome {
            timestamp: self.snapshot(index),
            piggyback: piggyback_out,
            marked_pending,
        })
    }

    /// Applies a control message from cover member `cm.from`. Settles
    /// every outstanding batch up to the acknowledged send index; batches
    /// for later sends stay pending. Returns the slots written.
    pub fn on_control(&mut self, cm: &ControlMessage) -> Result<Vec<AppliedNext>, InlineError> {
        if self.cover_position.is_some() || cm.to != self.proc {
            return Err(InlineError::ControlEndpointMismatch);
        }
        let j = self
            .cover
            .position(cm.from)
            .ok_or(InlineError::ControlEndpointMismatch)?;
        if !self.sent_to[j].contains(&cm.send_index) {
            return Err(InlineError::UnknownSendIndex {
                from: cm.from,
                send_index: cm.send_index,
            });
        }
        if cm.recv_index <= self.last_control_recv[j] {
            return Err(InlineError::OutOfOrderControl {
                from: cm.from,
                recv_index: cm.recv_index,
                last: self.last_control_recv[j],
            });
        }
        self.last_control_recv[j] = cm.recv_index;

        let mut applied = Vec::new();
        while let Some(head) = self.pending[j].front() {
            if head.send_index > cm.send_index {
                break;
            }
            let batch = self.pending[j].pop_front().unwrap();
            for idx in batch.events {
                let StampCell::NonCover { next, .. } = &mut self.history[idx as usize - 1].cell
                else {
                    unreachable!("non-cover process has non-cover cells")
                };
                let slot = next.get_mut(&j).expect("batched slot is tracked");
                debug_assert_eq!(*slot, NextEntry::Pending);
                *slot = NextEntry::Finite(cm.recv_index);
                applied.push((idx, j, cm.recv_index));
            }
        }
        Ok(applied)
    }

    /// Answers a timestamp query for a local event at time `now`. Blocks
    /// exactly when some slot is pending, which happens iff an outbound
    /// send exists whose receive index is not yet known. Cover events are
    /// always ready.
    pub fn query(&self, event_index: u32, now: Rat) -> Result<QueryResult, InlineError> {
        let record =
            self.history
                .get(event_index as usize - 1)
                .ok_or(InlineError::UnknownEvent {
                    proc: self.proc,
                    index: event_index,
                })?;
        if now < record.at {
            return Err(InlineError::QueryBeforeEvent {
                proc: self.proc,
                index: event_index,
                at: record.at,
                now,
            });
        }
        match &record.cell {
            StampCell::Cover { .. } => Ok(QueryResult::Ready(self.snapshot(event_index))),
            StampCell::NonCover { next, .. } => {
                let missing: BTreeSet<usize> = next
                    .iter()
                    .filter(|(_, e)| e.is_pending())
                    .map(|(&j, _)| j)
                    .collect();
                if missing.is_empty() {
                    Ok(QueryResult::Ready(self.snapshot(event_index)))
                } else {
                    Ok(QueryResult::Blocked { missing })
                }
            }
        }
    }

    /// Current timestamp of a local event (pending slots included as-is).
    pub fn snapshot(&self, event_index: u32) -> InlineTimestamp {
        let record = &self.history[event_index as usize - 1];
        match &record.cell {
            StampCell::Cover { vect } => InlineTimestamp::Cover { vect: vect.clone() },
            StampCell::NonCover { vect, next } => InlineTimestamp::NonCover {
                id: self.proc,
                index: event_index,
                vect: vect.clone(),
                next: next.clone(),
            },
        }
    }
}
