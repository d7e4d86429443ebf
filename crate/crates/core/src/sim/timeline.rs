//! Timestamp logs: what each algorithm said about each event, over time.
//!
//! The simulator records every timestamp at the moment its event occurs
//! and every later change to a `next` slot, with the simulated time of
//! the change. That mutation log is enough to answer "what would a query
//! at time t have returned" for any t, which is what the oracle sweeps
//! iterate over.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::execution::{EventId, ExecutionTrace, TransitiveClosure};
use crate::graph::ProcessId;
use crate::inline::{inline_less, InlineTimestamp, NextEntry};
use crate::rat::Rat;
use crate::vclock::{vc_less, VectorTimestamp};

use super::{Algo, SimError};

/// A timestamp value in a log: a plain vector for the online algorithms,
/// a structured stamp for the inline algorithm.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StampValue {
    Inline(InlineTimestamp),
    Vector(VectorTimestamp),
}

impl StampValue {
    pub fn as_inline(&self) -> Option<&InlineTimestamp> {
        match self {
            StampValue::Inline(t) => Some(t),
            StampValue::Vector(_) => None,
        }
    }

    pub fn as_vector(&self) -> Option<&VectorTimestamp> {
        match self {
            StampValue::Vector(v) => Some(v),
            StampValue::Inline(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MutationValue {
    Pending,
    Finite(u32),
}

/// One change to a `next` slot of an event's timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NextMutation {
    pub at: Rat,
    pub position: usize,
    pub value: MutationValue,
}

/// Everything recorded about one event's timestamp.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub proc: ProcessId,
    pub index: u32,
    pub at: Rat,
    /// Timestamp at the moment the event occurred.
    pub initial: StampValue,
    /// Later slot changes, in simulated-time order. Empty for online
    /// algorithms.
    #[serde(default)]
    pub mutations: Vec<NextMutation>,
}

impl LogEntry {
    pub fn event(&self) -> EventId {
        EventId::new(self.proc, self.index)
    }

    /// Final value after all recorded mutations.
    pub fn final_value(&self) -> StampValue {
        self.value_at_unbounded()
    }

    fn value_at_unbounded(&self) -> StampValue {
        match &self.initial {
            StampValue::Vector(v) => StampValue::Vector(v.clone()),
            StampValue::Inline(t) => StampValue::Inline(self.apply_mutations(t, None)),
        }
    }

    fn apply_mutations(&self, base: &InlineTimestamp, upto: Option<Rat>) -> InlineTimestamp {
        let mut stamp = base.clone();
        if let InlineTimestamp::NonCover { next, .. } = &mut stamp {
            for m in &self.mutations {
                if upto.is_some_and(|t| m.at > t) {
                    break;
                }
                let value = match m.value {
                    MutationValue::Pending => NextEntry::Pending,
                    MutationValue::Finite(k) => NextEntry::Finite(k),
                };
                next.insert(m.position, value);
            }
        }
        stamp
    }

    /// Timestamp as it stood at time `t` (which must be >= the event
    /// time).
    pub fn stamp_at(&self, t: Rat) -> StampValue {
        match &self.initial {
            StampValue::Vector(v) => StampValue::Vector(v.clone()),
            StampValue::Inline(base) => StampValue::Inline(self.apply_mutations(base, Some(t))),
        }
    }

    /// Half-open pending windows per cover position, derived from the
    /// mutation log: [marked pending, resolved finite).
    fn pending_intervals(&self) -> Vec<(Rat, Option<Rat>)> {
        let mut open: BTreeMap<usize, Rat> = BTreeMap::new();
        let mut out = Vec::new();
        for m in &self.mutations {
            match m.value {
                MutationValue::Pending => {
                    open.insert(m.position, m.at);
                }
                MutationValue::Finite(_) => {
                    if let Some(start) = open.remove(&m.position) {
                        out.push((start, Some(m.at)));
                    }
                }
            }
        }
        out.extend(open.into_values().map(|start| (start, None)));
        out
    }

    /// Earliest time `>= t` at which no slot is pending, `None` if the
    /// recorded execution never resolves every slot.
    pub fn unblocks_at(&self, t: Rat) -> Option<Rat> {
        let mut intervals = self.pending_intervals();
        intervals.sort_by_key(|(start, _)| *start);
        let mut candidate = t;
        loop {
            let covering = intervals
                .iter()
                .find(|(start, end)| *start <= candidate && end.is_none_or(|e| candidate < e));
            match covering {
                None => return Some(candidate),
                Some((_, None)) => return None,
                Some((_, Some(end))) => candidate = *end,
            }
        }
    }
}

/// What a reconstructed query at some time would return.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryView {
    Ready(StampValue),
    Blocked {
        missing: BTreeSet<usize>,
        unblocks_at: Option<Rat>,
    },
}

/// The per-run timestamp record: algorithm, cover (for the inline
/// algorithm), and one entry per event in occurrence order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimestampLog {
    pub algo: Algo,
    /// Cover members in slot order, present for the inline algorithm.
    pub cover: Option<Vec<ProcessId>>,
    /// Whether next arrays were restricted to cover neighbors; size
    /// checks only apply to the full configuration.
    #[serde(default)]
    pub neighbor_restricted: bool,
    pub entries: Vec<LogEntry>,
}

impl TimestampLog {
    pub fn new(algo: Algo, cover: Option<Vec<ProcessId>>) -> TimestampLog {
        TimestampLog {
            algo,
            cover,
            neighbor_restricted: false,
            entries: Vec::new(),
        }
    }

    pub fn entry(&self, event: EventId) -> Option<&LogEntry> {
        self.entries.iter().find(|e| e.event() == event)
    }

    pub fn cover_size(&self) -> Option<usize> {
        self.cover.as_ref().map(Vec::len)
    }

    pub fn in_cover(&self, p: ProcessId) -> bool {
        self.cover.as_ref().is_some_and(|c| c.contains(&p))
    }

    /// Latest simulated time at which anything was recorded.
    pub fn last_activity(&self) -> Rat {
        self.entries
            .iter()
            .flat_map(|e| std::iter::once(e.at).chain(e.mutations.iter().map(|m| m.at)))
            .max()
            .unwrap_or(Rat::ZERO)
    }

    /// A time after which nothing changes any more.
    pub fn quiescence(&self) -> Rat {
        self.last_activity() + Rat::ONE
    }

    /// Reconstructs the query outcome for `event` at time `t`. `None` if
    /// the event is unknown or `t` precedes it.
    pub fn query_at(&self, event: EventId, t: Rat) -> Option<QueryView> {
        let entry = self.entry(event)?;
        if t < entry.at {
            return None;
        }
        let stamp = entry.stamp_at(t);
        let pending: BTreeSet<usize> = match &stamp {
            StampValue::Inline(InlineTimestamp::NonCover { next, .. }) => next
                .iter()
                .filter(|(_, v)| v.is_pending())
                .map(|(&j, _)| j)
                .collect(),
            _ => BTreeSet::new(),
        };
        if pending.is_empty() {
            Some(QueryView::Ready(stamp))
        } else {
            Some(QueryView::Blocked {
                missing: pending,
                unblocks_at: entry.unblocks_at(t),
            })
        }
    }
}

/// Partition of a comparison by where its two events sit
/// relative to the cover.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CoverCase {
    /// Both events at cover processes.
    BothCover,
    /// First in the cover, second outside.
    CoverToOutside,
    /// First outside the cover, second inside.
    OutsideToCover,
    /// Both outside the cover.
    BothOutside,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseCounts(pub BTreeMap<CoverCase, u64>);

impl CaseCounts {
    fn bump(&mut self, case: CoverCase) {
        *self.0.entry(case).or_insert(0) += 1;
    }

    pub fn get(&self, case: CoverCase) -> u64 {
        self.0.get(&case).copied().unwrap_or(0)
    }

    pub fn merge(&mut self, other: &CaseCounts) {
        for (&case, &count) in &other.0 {
            *self.0.entry(case).or_insert(0) += count;
        }
    }
}

/// One comparison where the timestamps and the oracle disagreed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Disagreement {
    pub first: EventId,
    pub second: EventId,
    pub at: Rat,
    pub timestamps_claim: bool,
    pub oracle_says: bool,
    pub first_stamp: String,
    pub second_stamp: String,
}

/// Aggregated result of sweeping an algorithm's output against the
/// oracle.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepReport {
    pub comparisons: u64,
    pub blocked_samples: u64,
    pub disagreements: Vec<Disagreement>,
    pub cases: CaseCounts,
    pub distinctness_violations: u64,
    pub element_count_violations: u64,
}

impl SweepReport {
    pub fn clean(&self) -> bool {
        self.disagreements.is_empty()
            && self.distinctness_violations == 0
            && self.element_count_violations == 0
    }

    pub fn merge(&mut self, other: &SweepReport) {
        self.comparisons += other.comparisons;
        self.blocked_samples += other.blocked_samples;
        self.disagreements
            .extend(other.disagreements.iter().cloned());
        self.cases.merge(&other.cases);
        self.distinctness_violations += other.distinctness_violations;
        self.element_count_violations += other.element_count_violations;
    }
}

fn hb(trace: &ExecutionTrace, closure: Option<&TransitiveClosure>, e: EventId, f: EventId) -> bool {
    match closure {
        Some(c) => c.reaches(e, f),
        None => trace.happened_before(e, f).expect("events exist"),
    }
}

/// Sweeps an inline run against the oracle: for every ordered event pair
/// and every sampled query time at or after both events (all event times
/// plus quiescence), when both queries are ready the comparator must
/// agree with happened-before. Also checks timestamp distinctness and
/// element counts at every sample.
pub fn inline_sweep(trace: &ExecutionTrace, log: &TimestampLog) -> Result<SweepReport, SimError> {
    let c = log
        .cover_size()
        .ok_or_else(|| SimError::Script("inline sweep needs an inline log with a cover".into()))?;
    let closure = TransitiveClosure::build(trace);
    let mut report = SweepReport::default();

    let mut samples = trace.event_times();
    samples.push(log.quiescence());

    let events: Vec<&LogEntry> = log.entries.iter().collect();
    for &t in &samples {
        // Reconstruct every query outcome at this sample time.
        let mut ready: Vec<(EventId, InlineTimestamp)> = Vec::new();
        for entry in &events {
            if entry.at > t {
                continue;
            }
            match log.query_at(entry.event(), t) {
                Some(QueryView::Ready(StampValue::Inline(stamp))) => {
                    let expected = if log.in_cover(entry.proc) {
                        Some(c)
                    } else if log.neighbor_restricted {
                        None
                    } else {
                        Some(2 * c + 2)
                    };
                    if expected.is_some_and(|e| stamp.element_count() != e) {
                        report.element_count_violations += 1;
                    }
                    ready.push((entry.event(), stamp));
                }
                Some(QueryView::Blocked { .. }) => report.blocked_samples += 1,
                Some(QueryView::Ready(StampValue::Vector(_))) | None => {
                    return Err(SimError::Script("inline sweep saw a vector stamp".into()))
                }
            }
        }
        for (i, (e, se)) in ready.iter().enumerate() {
            for (f, sf) in &ready[i + 1..] {
                if se == sf {
                    report.distinctness_violations += 1;
                }
                for ((a, sa), (b, sb)) in [((e, se), (f, sf)), ((f, sf), (e, se))] {
                    let claim = inline_less(sa, sb)?;
                    let truth = hb(trace, closure.as_ref(), *a, *b);
                    report.comparisons += 1;
                    report.cases.bump(classify(log, *a, *b));
                    if claim != truth {
                        report.disagreements.push(Disagreement {
                            first: *a,
                            second: *b,
                            at: t,
                            timestamps_claim: claim,
                            oracle_says: truth,
                            first_stamp: sa.to_string(),
                            second_stamp: sb.to_string(),
                        });
                    }
                }
            }
        }
    }
    Ok(report)
}

fn classify(log: &TimestampLog, e: EventId, f: EventId) -> CoverCase {
    match (log.in_cover(e.proc), log.in_cover(f.proc)) {
        (true, true) => CoverCase::BothCover,
        (true, false) => CoverCase::CoverToOutside,
        (false, true) => CoverCase::OutsideToCover,
        (false, false) => CoverCase::BothOutside,
    }
}

/// Sweeps an online run (vector or star clocks) against the oracle:
/// final timestamps of all event pairs must order exactly as
/// happened-before, and be pairwise distinct.
pub fn online_sweep(trace: &ExecutionTrace, log: &TimestampLog) -> Result<SweepReport, SimError> {
    let closure = TransitiveClosure::build(trace);
    let mut report = SweepReport::default();
    let stamps: Vec<(EventId, VectorTimestamp)> =
        log.entries
            .iter()
            .map(|entry| {
                let v =
                    entry.final_value().as_vector().cloned().ok_or_else(|| {
                        SimError::Script("online sweep saw an inline stamp".into())
                    })?;
                Ok((entry.event(), v))
            })
            .collect::<Result<_, SimError>>()?;

    for (i, (e, se)) in stamps.iter().enumerate() {
        for (f, sf) in &stamps[i + 1..] {
            if se == sf {
                report.distinctness_violations += 1;
            }
            for ((a, sa), (b, sb)) in [((e, se), (f, sf)), ((f, sf), (e, se))] {
                let claim = vc_less(sa, sb)?;
                let truth = hb(trace, closure.as_ref(), *a, *b);
                report.comparisons += 1;
                if claim != truth {
                    report.disagreements.push(Disagreement {
                        first: *a,
                        second: *b,
                        at: Rat::ZERO,
                        timestamps_claim: claim,
                        oracle_says: truth,
                        first_stamp: sa.to_string(),
                        second_stamp: sb.to_string(),
                    });
                }
            }
        }
    }
    Ok(report)
}

/// Write-once audit over an inline log: per event and slot, a pending
/// mark may appear at most once, a finite value at most once, nothing
/// follows a finite value, and the frozen fields of the initial stamp
/// never change. Returns the number of violations.
pub fn write_once_violations(log: &TimestampLog) -> u64 {
    let mut violations = 0;
    for entry in &log.entries {
        let mut per_slot: BTreeMap<usize, Vec<MutationValue>> = BTreeMap::new();
        for m in &entry.mutations {
            per_slot.entry(m.position).or_default().push(m.value);
        }
        for values in per_slot.values() {
            let pendings = values
                .iter()
                .filter(|v| matches!(v, MutationValue::Pending))
                .count();
            let finites: Vec<u32> = values
                .iter()
                .filter_map(|v| match v {
                    MutationValue::Finite(k) => Some(*k),
                    MutationValue::Pending => None,
                })
                .collect();
            if pendings > 1 || finites.len() > 1 {
                violations += 1;
            }
            // Nothing may follow a finite assignment.
            if let Some(pos) = values
                .iter()
                .position(|v| matches!(v, MutationValue::Finite(_)))
            {
                if pos + 1 != values.len() {
                    violations += 1;
                }
            }
        }
        // vect, id and index are frozen: the final stamp must agree with
        // the initial one on all of them.
        if let (StampValue::Inline(a), StampValue::Inline(b)) =
            (&entry.initial, &entry.final_value())
        {
            if a.vect() != b.vect() || a.id() != b.id() || a.index() != b.index() {
                violations += 1;
            }
        }
    }
    violations
}
