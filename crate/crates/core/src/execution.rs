//! Finite executions as event DAGs, plus the happened-before oracle.
//!
//! The trace is the ground truth every timestamp algorithm is checked
//! against. `happened_before` answers reachability over the DAG whose
//! edges are consecutive same-process events and send-to-receive pairs;
//! it never consults any timestamp state, so it stays an independent
//! oracle.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{CommunicationGraph, ProcessId};
use crate::rat::Rat;

/// Identifier of a message within one execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MessageId(pub u64);

/// An event is addressed by its process and 1-based index there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EventId {
    pub proc: ProcessId,
    pub index: u32,
}

impl EventId {
    pub fn new(proc: ProcessId, index: u32) -> EventId {
        EventId { proc, index }
    }
}

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.proc, self.index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EventKind {
    Send { to: ProcessId, msg: MessageId },
    Receive { msg: MessageId },
    Compute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub proc: ProcessId,
    pub index: u32,
    #[serde(flatten)]
    pub kind: EventKind,
    pub at: Rat,
}

impl Event {
    pub fn id(&self) -> EventId {
        EventId::new(self.proc, self.index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageRecord {
    pub send: EventId,
    pub recv: Option<EventId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("event {0} skips an index (expected {1})")]
    IndexGap(EventId, u32),
    #[error("event {0} at {1} does not advance past {2}")]
    TimeNotIncreasing(EventId, Rat, Rat),
    #[error("receive of unknown message {0:?}")]
    ReceiveWithoutSend(MessageId),
    #[error("message {0:?} already received")]
    DuplicateReceive(MessageId),
    #[error("message {0:?} already sent")]
    DuplicateSend(MessageId),
    #[error("no channel between {0} and {1}")]
    NoChannel(ProcessId, ProcessId),
    #[error("receive of {0:?} at {1} not after its send at {2}")]
    ReceiveBeforeSend(MessageId, Rat, Rat),
    #[error("event time {0} is negative")]
    NegativeTime(Rat),
    #[error("unknown event {0}")]
    UnknownEvent(EventId),
}

/// The canonical record of a finite execution: per-process event lists
/// plus the message table. Built by appending events in per-process
/// order; immutable once handed out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExecutionTrace {
    processes: usize,
    edges: Vec<(ProcessId, ProcessId)>,
    events: Vec<Vec<Event>>,
    messages: BTreeMap<MessageId, MessageRecord>,
    #[serde(skip)]
    graph: CommunicationGraph,
}

impl ExecutionTrace {
    pub fn new(graph: CommunicationGraph) -> ExecutionTrace {
        ExecutionTrace {
            processes: graph.process_count(),
            edges: graph.edges().collect(),
            events: vec![Vec::new(); graph.process_count()],
            messages: BTreeMap::new(),
            graph,
        }
    }

    pub fn graph(&self) -> &CommunicationGraph {
        &self.graph
    }

    pub fn process_count(&self) -> usize {
        self.processes
    }

    pub fn event_count(&self) -> usize {
        self.events.iter().map(Vec::len).sum()
    }

    pub fn events_at(&self, p: ProcessId) -> &[Event] {
        &self.events[p.0]
    }

    pub fn all_events(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().flatten()
    }

    pub fn messages(&self) -> &BTreeMap<MessageId, MessageRecord> {
        &self.messages
    }

    pub fn event(&self, id: EventId) -> Result<&Event, TraceError> {
        self.events
            .get(id.proc.0)
            .and_then(|list| list.get(id.index as usize - 1))
            .ok_or(TraceError::UnknownEvent(id))
    }

    /// Appends the next event of its process. Indices must be contiguous
    /// and times strictly increasing per process; message bookkeeping is
    /// validated here.
    pub fn append_event(&mut self, e: Event) -> Result<(), TraceError> {
        let id = e.id();
        if e.at.is_negative() {
            return Err(TraceError::NegativeTime(e.at));
        }
        let list = &self.events[e.proc.0];
        let expected = list.len() as u32 + 1;
        if e.index != expected {
            return Err(TraceError::IndexGap(id, expected));
        }
        if let Some(prev) = list.last() {
            if e.at <= prev.at {
                return Err(TraceError::TimeNotIncreasing(id, e.at, prev.at));
            }
        }
        match e.kind {
            EventKind::Send { to, msg } => {
                if !self.graph.has_edge(e.proc, to) {
                    return Err(TraceError::NoChannel(e.proc, to));
                }
                if self.messages.contains_key(&msg) {
                    return Err(TraceError::DuplicateSend(msg));
                }
                self.messages.insert(
                    msg,
                    MessageRecord {
                        send: id,
                        recv: None,
                    },
                );
            }
            EventKind::Receive { msg } => {
                let record = self
                    .messages
                    .get(&msg)
                    .copied()
                    .ok_or(TraceError::ReceiveWithoutSend(msg))?;
                if record.recv.is_some() {
                    return Err(TraceError::DuplicateReceive(msg));
                }
                let send_at = self.event(record.send)?.at;
                if e.at <= send_at {
                    return Err(TraceError::ReceiveBeforeSend(msg, e.at, send_at));
                }
                self.messages.get_mut(&msg).unwrap().recv = Some(id);
            }
            EventKind::Compute => {}
        }
        self.events[e.proc.0].push(e);
        Ok(())
    }

    /// Immediate causal successors of `e`: the next event at the same
    /// process, and the receive if `e` is a delivered send.
    fn successors(&self, e: EventId) -> Vec<EventId> {
        let mut out = Vec::with_capacity(2);
        let list = &self.events[e.proc.0];
        if (e.index as usize) < list.len() {
            out.push(EventId::new(e.proc, e.index + 1));
        }
        if let EventKind::Send { msg, .. } = list[e.index as usize - 1].kind {
            if let Some(recv) = self.messages[&msg].recv {
                out.push(recv);
            }
        }
        out
    }

    /// The happened-before oracle: true iff `f` is reachable from `e` in
    /// the event DAG. Irreflexive. Per-event DFS, no closure matrices.
    pub fn happened_before(&self, e: EventId, f: EventId) -> Result<bool, TraceError> {
        self.event(e)?;
        self.event(f)?;
        if e == f {
            return Ok(false);
        }
        // Same-process order is the index order.
        if e.proc == f.proc {
            return Ok(e.index < f.index);
        }
        let mut seen = std::collections::BTreeSet::new();
        let mut stack = vec![e];
        while let Some(cur) = stack.pop() {
            for next in self.successors(cur) {
                if next == f {
                    return Ok(true);
                }
                // Prune: an event at f's process past f cannot lead back.
                if next.proc == f.proc && next.index > f.index {
                    continue;
                }
                if seen.insert(next) {
                    stack.push(next);
                }
            }
        }
        Ok(false)
    }

    /// Neither `e -> f` nor `f -> e`, and `e != f`.
    pub fn concurrent(&self, e: EventId, f: EventId) -> Result<bool, TraceError> {
        Ok(e != f && !self.happened_before(e, f)? && !self.happened_before(f, e)?)
    }

    /// First send to `to` at `e`'s process with index >= `e.index` and
    /// occurrence time <= `at_time`; `None` when no such send exists yet.
    pub fn outbound(
        &self,
        to: ProcessId,
        e: EventId,
        at_time: Rat,
    ) -> Result<Option<EventId>, TraceError> {
        self.event(e)?;
        let found = self.events[e.proc.0]
            .iter()
            .skip(e.index as usize - 1)
            .take_while(|ev| ev.at <= at_time)
            .find(|ev| matches!(ev.kind, EventKind::Send { to: t, .. } if t == to));
        Ok(found.map(Event::id))
    }

    /// Receive of `outbound(to, e)` if it has occurred by `at_time`.
    pub fn inbound(
        &self,
        to: ProcessId,
        e: EventId,
        at_time: Rat,
    ) -> Result<Option<EventId>, TraceError> {
        let Some(send) = self.outbound(to, e, at_time)? else {
            return Ok(None);
        };
        let EventKind::Send { msg, .. } = self.event(send)?.kind else {
            unreachable!("outbound returns send events")
        };
        match self.messages[&msg].recv {
            Some(recv) if self.event(recv)?.at <= at_time => Ok(Some(recv)),
            _ => Ok(None),
        }
    }

    /// All event occurrence times, sorted ascending, deduplicated.
    pub fn event_times(&self) -> Vec<Rat> {
        let mut times: Vec<Rat> = self.all_events().map(|e| e.at).collect();
        times.sort();
        times.dedup();
        times
    }
}

/// Dense all-pairs reachability over a trace, for sweep-style checks.
/// Intended for desk-scale traces; refuses anything above `MAX_EVENTS`.
pub struct TransitiveClosure {
    ids: Vec<EventId>,
    positions: BTreeMap<EventId, usize>,
    reach: Vec<Vec<bool>>,
}

impl TransitiveClosure {
    pub const MAX_EVENTS: usize = 2000;

    pub fn build(trace: &ExecutionTrace) -> Option<TransitiveClosure> {
        let ids: Vec<EventId> = trace.all_events().map(Event::id).collect();
        let m = ids.len();
        if m > Self::MAX_EVENTS {
            return None;
        }
        let positions: BTreeMap<EventId, usize> =
            ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let mut reach = vec![vec![false; m]; m];
        // Topological order by occurrence time is valid for this DAG:
        // every edge goes strictly forward in time.
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&i| trace.event(ids[i]).unwrap().at);
        for &i in order.iter().rev() {
            for succ in trace.successors(ids[i]) {
                let j = positions[&succ];
                reach[i][j] = true;
                let (row_i, row_j) = if i < j {
                    let (a, b) = reach.split_at_mut(j);
                    (&mut a[i], &b[0])
                } else {
                    let (a, b) = reach.split_at_mut(i);
                    (&mut b[0], &a[j])
                };
                for (x, y) in row_i.iter_mut().zip(row_j.iter()) {
                    *x |= *y;
                }
            }
        }
        Some(TransitiveClosure {
            ids,
            positions,
            reach,
        })
    }

    pub fn reaches(&self, e: EventId, f: EventId) -> bool {
        self.reach[self.positions[&e]][self.positions[&f]]
    }

    pub fn events(&self) -> &[EventId] {
        &self.ids
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rat;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn p(i: usize) -> ProcessId {
        ProcessId(i)
    }

    fn ev(proc: usize, index: u32, kind: EventKind, at: i64) -> Event {
        Event {
            proc: p(proc),
            index,
            kind,
            at: Rat::from_int(at),
        }
    }

    fn send(to: usize, msg: u64) -> EventKind {
        EventKind::Send {
            to: p(to),
            msg: MessageId(msg),
        }
    }

    fn recv(msg: u64) -> EventKind {
        EventKind::Receive {
            msg: MessageId(msg),
        }
    }

    #[test]
    fn append_compute_to_empty_trace() {
        let mut t = ExecutionTrace::new(CommunicationGraph::star(3));
        t.append_event(ev(0, 1, EventKind::Compute, 1)).unwrap();
        assert_eq!(t.event_count(), 1);
    }

    #[test]
    fn append_rejects_unknown_receive() {
        let mut t = ExecutionTrace::new(CommunicationGraph::star(3));
        let err = t.append_event(ev(0, 1, recv(9), 1)).unwrap_err();
        assert_eq!(err, TraceError::ReceiveWithoutSend(MessageId(9)));
    }

    #[test]
    fn append_rejects_send_without_channel() {
        let mut t = ExecutionTrace::new(CommunicationGraph::star(3));
        // Radials p1 and p2 share no edge in a star.
        let err = t.append_event(ev(1, 1, send(2, 0), 1)).unwrap_err();
        assert_eq!(err, TraceError::NoChannel(p(1), p(2)));
    }

    #[test]
    fn append_rejects_index_gap_and_stale_time() {
        let mut t = ExecutionTrace::new(CommunicationGraph::star(3));
        t.append_event(ev(0, 1, EventKind::Compute, 1)).unwrap();
        assert!(matches!(
            t.append_event(ev(0, 3, EventKind::Compute, 2)),
            Err(TraceError::IndexGap(_, 2))
        ));
        assert!(matches!(
            t.append_event(ev(0, 2, EventKind::Compute, 1)),
            Err(TraceError::TimeNotIncreasing(..))
        ));
    }

    #[test]
    fn append_rejects_receive_at_or_before_send() {
        let mut t = ExecutionTrace::new(CommunicationGraph::star(3));
        t.append_event(ev(1, 1, send(0, 0), 5)).unwrap();
        assert!(matches!(
            t.append_event(ev(0, 1, recv(0), 5)),
            Err(TraceError::ReceiveBeforeSend(..))
        ));
    }

    #[test]
    fn append_rejects_duplicate_message_use() {
        let mut t = ExecutionTrace::new(CommunicationGraph::star(3));
        t.append_event(ev(1, 1, send(0, 0), 1)).unwrap();
        assert_eq!(
            t.append_event(ev(1, 2, send(0, 0), 2)).unwrap_err(),
            TraceError::DuplicateSend(MessageId(0))
        );
        t.append_event(ev(0, 1, recv(0), 3)).unwrap();
        assert_eq!(
            t.append_event(ev(0, 2, recv(0), 4)).unwrap_err(),
            TraceError::DuplicateReceive(MessageId(0))
        );
    }

    /// Two-process ping: p1 sends, p0 receives.
    fn ping_trace() -> ExecutionTrace {
        let mut t = ExecutionTrace::new(CommunicationGraph::star(3));
        t.append_event(ev(1, 1, send(0, 0), 1)).unwrap();
        t.append_event(ev(0, 1, recv(0), 3)).unwrap();
        t.append_event(ev(0, 2, EventKind::Compute, 4)).unwrap();
        t
    }

    #[test]
    fn happened_before_follows_messages() {
        let t = ping_trace();
        let s = EventId::new(p(1), 1);
        let r = EventId::new(p(0), 1);
        let c = EventId::new(p(0), 2);
        assert!(t.happened_before(s, r).unwrap());
        assert!(t.happened_before(s, c).unwrap());
        assert!(!t.happened_before(r, s).unwrap());
        assert!(!t.happened_before(s, s).unwrap());
        assert!(!t.concurrent(s, r).unwrap());
        assert!(!t.concurrent(s, s).unwrap());
    }

    #[test]
    fn happened_before_rejects_unknown_events() {
        let t = ping_trace();
        let ghost = EventId::new(p(2), 1);
        assert!(matches!(
            t.happened_before(ghost, EventId::new(p(0), 1)),
            Err(TraceError::UnknownEvent(_))
        ));
    }

    #[test]
    fn outbound_and_inbound_window() {
        let t = ping_trace();
        let s = EventId::new(p(1), 1);
        // The send itself is its own outbound.
        assert_eq!(t.outbound(p(0), s, Rat::from_int(1)).unwrap(), Some(s));
        // Before the send nothing is outbound... from an earlier vantage
        // there is no earlier event at p1, so query the receive window.
        assert_eq!(t.inbound(p(0), s, Rat::from_int(2)).unwrap(), None);
        assert_eq!(
            t.inbound(p(0), s, Rat::from_int(3)).unwrap(),
            Some(EventId::new(p(0), 1))
        );
    }

    #[test]
    fn outbound_none_without_sends() {
        let t = ping_trace();
        let r = EventId::new(p(0), 1);
        assert_eq!(t.outbound(p(1), r, Rat::from_int(100)).unwrap(), None);
    }

    #[test]
    fn in_flight_message_is_bottom() {
        let mut t = ExecutionTrace::new(CommunicationGraph::star(3));
        t.append_event(ev(1, 1, send(0, 0), 1)).unwrap();
        t.append_event(ev(0, 1, recv(0), 10)).unwrap();
        let s = EventId::new(p(1), 1);
        // Delay straddles the query time: outbound exists, inbound does not.
        assert_eq!(t.outbound(p(0), s, rat(11, 2)).unwrap(), Some(s));
        assert_eq!(t.inbound(p(0), s, rat(11, 2)).unwrap(), None);
        assert!(t.inbound(p(0), s, Rat::from_int(10)).unwrap().is_some());
    }

    /// Random well-formed trace on a complete graph.
    fn random_trace(rng: &mut StdRng, n: usize, events: usize) -> ExecutionTrace {
        let mut t = ExecutionTrace::new(CommunicationGraph::complete(n));
        let mut indices = vec![0u32; n];
        let mut clock = 0i64;
        let mut next_msg = 0u64;
        let mut in_flight: Vec<(MessageId, usize)> = Vec::new();
        for _ in 0..events {
            clock += 1;
            let deliverable = !in_flight.is_empty() && rng.gen_bool(0.5);
            if deliverable {
                let (msg, to) = in_flight.swap_remove(rng.gen_range(0..in_flight.len()));
                indices[to] += 1;
                t.append_event(ev(to, indices[to], recv(msg.0), clock))
                    .unwrap();
            } else {
                let proc = rng.gen_range(0..n);
                indices[proc] += 1;
                if rng.gen_bool(0.6) {
                    let mut to = rng.gen_range(0..n - 1);
                    if to >= proc {
                        to += 1;
                    }
                    t.append_event(ev(proc, indices[proc], send(to, next_msg), clock))
                        .unwrap();
                    in_flight.push((MessageId(next_msg), to));
                    next_msg += 1;
                } else {
                    t.append_event(ev(proc, indices[proc], EventKind::Compute, clock))
                        .unwrap();
                }
            }
        }
        t
    }

    #[test]
    fn oracle_is_a_strict_partial_order() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.gen_range(2..=8);
            let events = rng.gen_range(5..=40);
            let t = random_trace(&mut rng, n, events);
            let ids: Vec<EventId> = t.all_events().map(Event::id).collect();
            for &a in &ids {
                assert!(!t.happened_before(a, a).unwrap());
                for &b in &ids {
                    let ab = t.happened_before(a, b).unwrap();
                    let ba = t.happened_before(b, a).unwrap();
                    assert!(!(ab && ba), "antisymmetry violated for {a} {b}");
                    if a.proc == b.proc && a != b {
                        assert_eq!(ab, a.index < b.index);
                    }
                    for &c in &ids {
                        if ab && t.happened_before(b, c).unwrap() {
                            assert!(t.happened_before(a, c).unwrap(), "transitivity");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn closure_refuses_oversized_traces() {
        let mut t = ExecutionTrace::new(CommunicationGraph::star(2));
        for i in 0..TransitiveClosure::MAX_EVENTS as u32 + 1 {
            t.append_event(ev(0, i + 1, EventKind::Compute, i as i64 + 1))
                .unwrap();
        }
        assert!(TransitiveClosure::build(&t).is_none());
        // The DFS oracle keeps working at that size.
        let first = EventId::new(p(0), 1);
        let last = EventId::new(p(0), TransitiveClosure::MAX_EVENTS as u32 + 1);
        assert!(t.happened_before(first, last).unwrap());
    }

    #[test]
    fn closure_agrees_with_dfs_oracle() {
        let mut rng = StdRng::seed_from_u64(13);
        for _ in 0..10 {
            let t = random_trace(&mut rng, 5, 30);
            let tc = TransitiveClosure::build(&t).unwrap();
            for &a in tc.events() {
                for &b in tc.events() {
                    assert_eq!(tc.reaches(a, b), t.happened_before(a, b).unwrap());
                }
            }
        }
    }

    #[test]
    fn outbound_inbound_monotone_in_time() {
        let mut rng = StdRng::seed_from_u64(17);
        let t = random_trace(&mut rng, 4, 30);
        let times = t.event_times();
        let ids: Vec<EventId> = t.all_events().map(Event::id).collect();
        for &e in &ids {
            for j in 0..4 {
                let mut prev_out = None;
                let mut prev_in = None;
                for &time in &times {
                    if time < t.event(e).unwrap().at {
                        continue;
                    }
                    let o = t.outbound(p(j), e, time).unwrap();
                    let i = t.inbound(p(j), e, time).unwrap();
                    if let Some(prev) = prev_out {
                        assert!(o == Some(prev), "outbound changed after becoming known");
                    }
                    if let Some(prev) = prev_in {
                        assert!(i == Some(prev), "inbound changed after becoming known");
                    }
                    prev_out = o.or(prev_out);
                    prev_in = i.or(prev_in);
                }
            }
        }
    }

    #[test]
    fn trace_serialization_shape() {
        let t = ping_trace();
        let json = serde_json::to_value(&t).unwrap();
        assert_eq!(json["processes"], 3);
        assert_eq!(json["events"][1][0]["kind"], "send");
        assert_eq!(json["events"][1][0]["to"], 0);
        assert_eq!(json["events"][0][0]["kind"], "receive");
        assert_eq!(json["messages"]["0"]["recv"]["index"], 1);
    }
}
