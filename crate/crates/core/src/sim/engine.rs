//! The discrete-event loop.
//!
//! One binary heap holds everything that can happen: control arrivals,
//! application deliveries, scripted actions, scripted queries. Items pop
//! in (time, class, key) order; delivery ties at one instant break on
//! (receiver id, message id), and control channels stay FIFO per pair by
//! dispatch sequence. Identical scripts therefore produce bit-identical
//! traces and logs.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use serde::Serialize;

use crate::execution::{Event, EventId, EventKind, ExecutionTrace, MessageId};
use crate::graph::{CoverSet, ProcessId};
use crate::inline::{
    ControlMessage, InlineConfig, InlineEventKind, InlinePiggyback, InlineProcessState, QueryResult,
};
use crate::rat::Rat;
use crate::star::StepKind;
use crate::vclock::VectorTimestamp;

use super::online::{FullVectorClock, OnlineClock, OnlineTimestamper, StarVectorClock};
use super::scenario::{ActionKind, ScenarioScript};
use super::timeline::{LogEntry, MutationValue, NextMutation, StampValue, TimestampLog};
use super::{Algo, SimError};

/// Why a scripted query produced no timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryFailure {
    /// The event exists in the execution but had not occurred by the
    /// query time.
    QueryBeforeEvent,
    /// No such event ever occurs in the execution.
    UnknownEvent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum QueryOutcome {
    Ready {
        timestamp: StampValue,
    },
    Blocked {
        missing: Vec<usize>,
        unblocks_at: Option<Rat>,
    },
    Failed {
        reason: QueryFailure,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QueryRecord {
    pub proc: ProcessId,
    pub event: u32,
    pub at: Rat,
    pub outcome: QueryOutcome,
}

/// Everything a run produces: the trace (oracle ground truth), the
/// timestamp log, and the scripted query answers.
#[derive(Debug, Clone, Serialize)]
pub struct RunOutput {
    pub scenario: String,
    pub algo: Algo,
    pub trace: ExecutionTrace,
    pub log: TimestampLog,
    pub queries: Vec<QueryRecord>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunConfig {
    pub inline: InlineConfig,
}

/// Runs a scenario under the given algorithm with default options.
pub fn run(script: &ScenarioScript, algo: Algo) -> Result<RunOutput, SimError> {
    run_with(script, algo, RunConfig::default())
}

pub fn run_with(
    script: &ScenarioScript,
    algo: Algo,
    config: RunConfig,
) -> Result<RunOutput, SimError> {
    Engine::new(script, algo, config)?.run()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct OrderKey {
    at: Rat,
    class: u8,
    a: u64,
    b: u64,
}

const CLASS_CONTROL: u8 = 0;
const CLASS_DELIVER: u8 = 1;
const CLASS_ACTION: u8 = 2;
const CLASS_QUERY: u8 = 3;

#[derive(Debug, Clone)]
enum Step {
    Control(ControlMessage),
    Deliver { msg: MessageId, to: ProcessId },
    Action(usize),
    Query(usize),
}

#[derive(Debug, Clone)]
struct Scheduled {
    key: OrderKey,
    step: Step,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key.cmp(&other.key)
    }
}

enum AlgoStates {
    Online(Vec<Box<dyn OnlineClock>>),
    Inline(Vec<InlineProcessState>),
}

struct Engine<'a> {
    script: &'a ScenarioScript,
    algo: Algo,
    trace: ExecutionTrace,
    states: AlgoStates,
    heap: BinaryHeap<Reverse<Scheduled>>,
    log: TimestampLog,
    entry_of: BTreeMap<EventId, usize>,
    vector_payloads: BTreeMap<MessageId, VectorTimestamp>,
    inline_payloads: BTreeMap<MessageId, InlinePiggyback>,
    next_msg: u64,
    control_seq: u64,
    last_control_arrival: BTreeMap<(ProcessId, ProcessId), Rat>,
    queries: Vec<QueryRecord>,
}

impl<'a> Engine<'a> {
    fn new(
        script: &'a ScenarioScript,
        algo: Algo,
        config: RunConfig,
    ) -> Result<Engine<'a>, SimError> {
        let graph = script.validate()?;
        let n = graph.process_count();

        let (states, cover_members) = match algo {
            Algo::VClock | Algo::Star => {
                let factory: Box<dyn OnlineTimestamper> = match algo {
                    Algo::VClock => Box::new(FullVectorClock),
                    _ => Box::new(StarVectorClock),
                };
                let states = graph
                    .processes()
                    .map(|p| factory.make(n, p, &graph))
                    .collect::<Result<Vec<_>, _>>()?;
                (AlgoStates::Online(states), None)
            }
            Algo::Inline => {
                let cover: CoverSet = script.graph.cover.resolve(&graph)?;
                let states = graph
                    .processes()
                    .map(|p| InlineProcessState::new(p, &cover, &graph, config.inline))
                    .collect();
                (AlgoStates::Inline(states), Some(cover.members().to_vec()))
            }
        };

        let mut heap = BinaryHeap::new();
        for (idx, action) in script.actions.iter().enumerate() {
            heap.push(Reverse(Scheduled {
                key: OrderKey {
                    at: action.at,
                    class: CLASS_ACTION,
                    a: idx as u64,
                    b: 0,
                },
                step: Step::Action(idx),
            }));
        }
        for (idx, query) in script.queries.iter().enumerate() {
            heap.push(Reverse(Scheduled {
                key: OrderKey {
                    at: query.at,
                    class: CLASS_QUERY,
                    a: idx as u64,
                    b: 0,
                },
                step: Step::Query(idx),
            }));
        }

        let mut log = TimestampLog::new(algo, cover_members);
        log.neighbor_restricted = algo == Algo::Inline && config.inline.neighbor_restricted;

        Ok(Engine {
            script,
            algo,
            trace: ExecutionTrace::new(graph),
            states,
            heap,
            log,
            entry_of: BTreeMap::new(),
            vector_payloads: BTreeMap::new(),
            inline_payloads: BTreeMap::new(),
            next_msg: 0,
            control_seq: 0,
            last_control_arrival: BTreeMap::new(),
            queries: Vec::new(),
        })
    }

    fn run(mut self) -> Result<RunOutput, SimError> {
        while let Some(Reverse(item)) = self.heap.pop() {
            let now = item.key.at;
            match item.step {
                Step::Action(idx) => self.handle_action(idx, now)?,
                Step::Deliver { msg, to } => self.handle_delivery(msg, to, now)?,
                Step::Control(cm) => self.handle_control(cm, now)?,
                Step::Query(idx) => self.handle_query(idx, now)?,
            }
        }
        self.finish_queries();
        Ok(RunOutput {
            scenario: self.script.name.clone(),
            algo: self.algo,
            trace: self.trace,
            log: self.log,
            queries: self.queries,
        })
    }

    fn next_index(&self, proc: ProcessId) -> u32 {
        self.trace.events_at(proc).len() as u32 + 1
    }

    fn record_event(&mut self, proc: ProcessId, index: u32, at: Rat, initial: StampValue) {
        self.entry_of
            .insert(EventId::new(proc, index), self.log.entries.len());
        self.log.entries.push(LogEntry {
            proc,
            index,
            at,
            initial,
            mutations: Vec::new(),
        });
    }

    fn record_pending(&mut self, proc: ProcessId, marked: &[(u32, usize)], at: Rat) {
        for &(index, position) in marked {
            let entry = self.entry_of[&EventId::new(proc, index)];
            self.log.entries[entry].mutations.push(NextMutation {
                at,
                position,
                value: MutationValue::Pending,
            });
        }
    }

    fn handle_action(&mut self, idx: usize, now: Rat) -> Result<(), SimError> {
        let action = self.script.actions[idx];
        let proc = action.proc;
        let index = self.next_index(proc);
        match action.kind {
            ActionKind::Compute => {
                self.trace.append_event(Event {
                    proc,
                    index,
                    kind: EventKind::Compute,
                    at: now,
                })?;
                self.drive_local(proc, index, StepKind::Compute, now, None, None)?;
            }
            ActionKind::Send { to, delay } => {
                let msg = MessageId(self.next_msg);
                self.next_msg += 1;
                self.trace.append_event(Event {
                    proc,
                    index,
                    kind: EventKind::Send { to, msg },
                    at: now,
                })?;
                self.drive_local(proc, index, StepKind::Send, now, None, Some(msg))?;
                self.heap.push(Reverse(Scheduled {
                    key: OrderKey {
                        at: now + delay,
                        class: CLASS_DELIVER,
                        a: to.0 as u64,
                        b: msg.0,
                    },
                    step: Step::Deliver { msg, to },
                }));
            }
        }
        Ok(())
    }

    fn handle_delivery(&mut self, msg: MessageId, to: ProcessId, now: Rat) -> Result<(), SimError> {
        let index = self.next_index(to);
        self.trace.append_event(Event {
            proc: to,
            index,
            kind: EventKind::Receive { msg },
            at: now,
        })?;
        self.drive_local(to, index, StepKind::Receive, now, Some(msg), None)?;
        Ok(())
    }

    /// Advances the algorithm state for one local event, records the log
    /// entry, stores outgoing piggybacks and dispatches control messages.
    fn drive_local(
        &mut self,
        proc: ProcessId,
        index: u32,
        kind: StepKind,
        now: Rat,
        incoming: Option<MessageId>,
        outgoing: Option<MessageId>,
    ) -> Result<(), SimError> {
        let (initial, marked, control) = match &mut self.states {
            AlgoStates::Online(states) => {
                let payload = incoming.map(|m| self.vector_payloads[&m].clone());
                let (stamp, out) = states[proc.0].on_event(kind, payload.as_ref())?;
                if let (Some(msg), Some(vector)) = (outgoing, out) {
                    self.vector_payloads.insert(msg, vector);
                }
                (StampValue::Vector(stamp), Vec::new(), None)
            }
            AlgoStates::Inline(states) => {
                let payload = incoming.map(|m| self.inline_payloads[&m].clone());
                let inline_kind = match kind {
                    StepKind::Send => InlineEventKind::Send {
                        to: match self.trace.event(EventId::new(proc, index))?.kind {
                            EventKind::Send { to, .. } => to,
                            _ => unreachable!("send action appends a send event"),
                        },
                    },
                    StepKind::Receive => InlineEventKind::Receive {
                        from: self.trace.messages()[&incoming.expect("receive has a message")]
                            .send
                            .proc,
                    },
                    StepKind::Compute => InlineEventKind::Compute,
                };
                let outcome = states[proc.0].on_event(inline_kind, now, payload.as_ref())?;
                if let (Some(msg), Some(pb)) = (outgoing, outcome.piggyback) {
                    self.inline_payloads.insert(msg, pb);
                }
                // A cover process that received from a non-cover sender
                // acknowledges over the control channel.
                let control = incoming.and_then(|msg| {
                    if !states[proc.0].in_cover() {
                        return None;
                    }
                    let send_index = payload.as_ref().unwrap().sender_index?;
                    Some((self.trace.messages()[&msg].send.proc, send_index))
                });
                (
                    StampValue::Inline(outcome.timestamp),
                    outcome.marked_pending,
                    control,
                )
            }
        };
        self.record_event(proc, index, now, initial);
        self.record_pending(proc, &marked, now);
        if let Some((sender, send_index)) = control {
            self.dispatch_control(proc, sender, send_index, index, now);
        }
        Ok(())
    }

    fn dispatch_control(
        &mut self,
        from: ProcessId,
        to: ProcessId,
        send_index: u32,
        recv_index: u32,
        now: Rat,
    ) {
        let delay = self.script.control_delay.delay(from, to);
        let mut arrival = now + delay;
        // FIFO per pair: never arrive before an earlier control; equal
        // arrivals are ordered by dispatch sequence.
        if let Some(&last) = self.last_control_arrival.get(&(from, to)) {
            arrival = arrival.max(last);
        }
        self.last_control_arrival.insert((from, to), arrival);
        self.control_seq += 1;
        self.heap.push(Reverse(Scheduled {
            key: OrderKey {
                at: arrival,
                class: CLASS_CONTROL,
                a: self.control_seq,
                b: 0,
            },
            step: Step::Control(ControlMessage {
                from,
                to,
                send_index,
                recv_index,
            }),
        }));
    }

    fn handle_control(&mut self, cm: ControlMessage, now: Rat) -> Result<(), SimError> {
        let AlgoStates::Inline(states) = &mut self.states else {
            unreachable!("control messages exist only under the inline algorithm")
        };
        let applied = states[cm.to.0].on_control(&cm)?;
        for (index, position, recv_index) in applied {
            let entry = self.entry_of[&EventId::new(cm.to, index)];
            self.log.entries[entry].mutations.push(NextMutation {
                at: now,
                position,
                value: MutationValue::Finite(recv_index),
            });
        }
        Ok(())
    }

    fn handle_query(&mut self, idx: usize, now: Rat) -> Result<(), SimError> {
        let spec = self.script.queries[idx];
        let outcome = match &self.states {
            AlgoStates::Inline(states) => match states[spec.proc.0].query(spec.event, now) {
                Ok(QueryResult::Ready(stamp)) => QueryOutcome::Ready {
                    timestamp: StampValue::Inline(stamp),
                },
                Ok(QueryResult::Blocked { missing }) => QueryOutcome::Blocked {
                    missing: missing.into_iter().collect(),
                    unblocks_at: None, // filled in after the run
                },
                Err(_) => QueryOutcome::Failed {
                    reason: QueryFailure::UnknownEvent,
                },
            },
            AlgoStates::Online(_) => {
                let id = EventId::new(spec.proc, spec.event);
                match self.entry_of.get(&id) {
                    Some(&entry) => QueryOutcome::Ready {
                        timestamp: self.log.entries[entry].initial.clone(),
                    },
                    None => QueryOutcome::Failed {
                        reason: QueryFailure::UnknownEvent,
                    },
                }
            }
        };
        self.queries.push(QueryRecord {
            proc: spec.proc,
            event: spec.event,
            at: now,
            outcome,
        });
        Ok(())
    }

    /// Post-run fixups: blocked queries learn when they unblock, and
    /// failures against events that did occur later become
    /// before-the-event failures.
    fn finish_queries(&mut self) {
        self.queries.sort_by_key(|q| (q.at, q.proc, q.event));
        for record in &mut self.queries {
            let id = EventId::new(record.proc, record.event);
            match &mut record.outcome {
                QueryOutcome::Blocked { unblocks_at, .. } => {
                    if let Some(&entry) = self.entry_of.get(&id) {
                        *unblocks_at = self.log.entries[entry].unblocks_at(record.at);
                    }
                }
                QueryOutcome::Failed { reason } => {
                    if self.entry_of.contains_key(&id) {
                        *reason = QueryFailure::QueryBeforeEvent;
                    }
                }
                QueryOutcome::Ready { .. } => {}
            }
        }
    }
}
