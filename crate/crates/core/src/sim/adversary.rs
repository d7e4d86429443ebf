//! The lower-bound adversary for short online clocks on star graphs.
//!
//! The construction: every radial process sends one message to the
//! center, all before any delivery, so the sends are pairwise concurrent
//! and their timestamps are already final. Reading those timestamps, the
//! adversary picks per coordinate a radial attaining the maximum; any
//! radial `p_k` outside that set gets its message delivered last. By the
//! time the center has received everything else, its timestamp dominates
//! `p_k`'s send stamp even though the two events are concurrent — any
//! clock with at most `n - 2` real-valued slots either duplicates a
//! timestamp or orders a concurrent pair.

use serde::Serialize;

use crate::execution::{Event, EventId, EventKind, ExecutionTrace, MessageId};
use crate::graph::{CommunicationGraph, ProcessId};
use crate::rat::Rat;
use crate::star::StepKind;
use crate::vclock::{vc_less, VectorTimestamp};

use super::online::OnlineTimestamper;
use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// Two distinct events received the same timestamp.
    DuplicateTimestamps,
    /// The timestamps order a pair the oracle calls concurrent.
    OrderClaimOnConcurrent,
    /// A happened-before pair whose timestamps do not order.
    MissedOrdering,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub first: EventId,
    pub second: EventId,
    pub first_stamp: VectorTimestamp,
    pub second_stamp: VectorTimestamp,
    /// Oracle verdict for the reported pair.
    pub oracle_concurrent: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AdversaryOutcome {
    Violation(Violation),
    NoViolationFound,
}

#[derive(Debug, Clone, Serialize)]
pub struct AdversaryReport {
    pub candidate: String,
    pub n: usize,
    pub vector_len: usize,
    /// Radials whose stamps attain the per-coordinate maxima.
    pub dominating_set: Vec<ProcessId>,
    /// The radial delivered last.
    pub victim: ProcessId,
    pub outcome: AdversaryOutcome,
    #[serde(skip)]
    pub trace: ExecutionTrace,
}

/// Runs the star construction against a candidate online clock of vector
/// length at most `n - 2`. Longer candidates are outside the bound's
/// scope and rejected.
pub fn star_adversary(
    candidate: &dyn OnlineTimestamper,
    n: usize,
) -> Result<AdversaryReport, SimError> {
    if n < 3 {
        return Err(SimError::Script(format!(
            "the construction needs n >= 3, got {n}"
        )));
    }
    let s = candidate.vector_len(n);
    if s > n - 2 {
        return Err(SimError::CandidateVectorTooLong { len: s, max: n - 2 });
    }

    let graph = CommunicationGraph::star(n);
    let mut clocks = graph
        .processes()
        .map(|p| candidate.make(n, p, &graph))
        .collect::<Result<Vec<_>, _>>()?;
    let mut trace = ExecutionTrace::new(graph);
    let mut stamps: Vec<(EventId, VectorTimestamp)> = Vec::new();

    // Phase 1: all radial sends occur before any delivery, so their
    // (online, final) timestamps cannot depend on the delivery order the
    // adversary chooses next.
    let mut piggybacks = Vec::new();
    for (i, clock) in clocks.iter_mut().enumerate().skip(1) {
        let id = EventId::new(ProcessId(i), 1);
        trace.append_event(Event {
            proc: ProcessId(i),
            index: 1,
            kind: EventKind::Send {
                to: ProcessId(0),
                msg: MessageId(i as u64),
            },
            at: Rat::from_int(i as i64),
        })?;
        let (stamp, piggyback) = clock.on_event(StepKind::Send, None)?;
        piggybacks.push(piggyback.unwrap_or(stamp.clone()));
        stamps.push((id, stamp));
    }

    // Pick per coordinate one radial attaining the maximum.
    let mut dominating = Vec::new();
    for l in 0..s {
        let best = (1..n)
            .max_by(|&a, &b| {
                let sa = stamps[a - 1].1.get(l);
                let sb = stamps[b - 1].1.get(l);
                // Prefer the smallest id among maxima.
                sa.cmp(&sb).then(b.cmp(&a))
            })
            .expect("radials exist");
        if !dominating.contains(&ProcessId(best)) {
            dominating.push(ProcessId(best));
        }
    }
    let victim = (1..n)
        .map(ProcessId)
        .find(|p| !dominating.contains(p))
        .expect("|S| <= n - 2 leaves a radial free");

    // Phase 2: deliver everything else, then the victim's message.
    let mut order: Vec<ProcessId> = (1..n).map(ProcessId).filter(|&p| p != victim).collect();
    order.push(victim);
    for (q, sender) in order.iter().enumerate() {
        let index = q as u32 + 1;
        trace.append_event(Event {
            proc: ProcessId(0),
            index,
            kind: EventKind::Receive {
                msg: MessageId(sender.0 as u64),
            },
            at: Rat::from_int((n + q) as i64),
        })?;
        let (stamp, _) = clocks[0].on_event(StepKind::Receive, Some(&piggybacks[sender.0 - 1]))?;
        stamps.push((EventId::new(ProcessId(0), index), stamp));
    }

    let outcome = scan_for_violation(&trace, &stamps)?;
    Ok(AdversaryReport {
        candidate: candidate.name(),
        n,
        vector_len: s,
        dominating_set: dominating,
        victim,
        outcome,
        trace,
    })
}

/// Scans all event pairs: duplicate timestamps first (preferring a pair
/// the oracle calls concurrent), then ordering claims on concurrent
/// pairs, then missed orderings.
fn scan_for_violation(
    trace: &ExecutionTrace,
    stamps: &[(EventId, VectorTimestamp)],
) -> Result<AdversaryOutcome, SimError> {
    let mut duplicate: Option<Violation> = None;
    let mut order_claim: Option<Violation> = None;
    let mut missed: Option<Violation> = None;

    for (i, (e, se)) in stamps.iter().enumerate() {
        for (f, sf) in &stamps[i + 1..] {
            let concurrent = trace.concurrent(*e, *f)?;
            if se == sf {
                let v = Violation {
                    kind: ViolationKind::DuplicateTimestamps,
                    first: *e,
                    second: *f,
                    first_stamp: se.clone(),
                    second_stamp: sf.clone(),
                    oracle_concurrent: concurrent,
                };
                if duplicate.is_none()
                    || (concurrent && !duplicate.as_ref().unwrap().oracle_concurrent)
                {
                    duplicate = Some(v);
                }
                continue;
            }
            for ((a, sa), (b, sb)) in [((e, se), (f, sf)), ((f, sf), (e, se))] {
                let claims = vc_less(sa, sb)?;
                let truth = trace.happened_before(*a, *b)?;
                if claims && !truth && order_claim.is_none() {
                    order_claim = Some(Violation {
                        kind: ViolationKind::OrderClaimOnConcurrent,
                        first: *a,
                        second: *b,
                        first_stamp: sa.clone(),
                        second_stamp: sb.clone(),
                        oracle_concurrent: concurrent,
                    });
                }
                if truth && !claims && missed.is_none() {
                    missed = Some(Violation {
                        kind: ViolationKind::MissedOrdering,
                        first: *a,
                        second: *b,
                        first_stamp: sa.clone(),
                        second_stamp: sb.clone(),
                        oracle_concurrent: concurrent,
                    });
                }
            }
        }
    }
    let found = duplicate.or(order_claim).or(missed);
    Ok(match found {
        Some(v) => AdversaryOutcome::Violation(v),
        None => AdversaryOutcome::NoViolationFound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::online::{
        ConstantZero, FullVectorClock, LamportScalar, StarVectorClock, TruncatedVectorClock,
    };

    #[test]
    fn truncated_vclock_is_violated() {
        let report = star_adversary(&TruncatedVectorClock { s: 2 }, 4).unwrap();
        let AdversaryOutcome::Violation(v) = &report.outcome else {
            panic!("expected a violation")
        };
        assert!(v.oracle_concurrent, "reported pair must be concurrent");
    }

    #[test]
    fn lamport_scalar_is_violated() {
        let report = star_adversary(&LamportScalar, 5).unwrap();
        let AdversaryOutcome::Violation(v) = &report.outcome else {
            panic!("expected a violation")
        };
        assert!(v.oracle_concurrent);
    }

    #[test]
    fn zero_candidate_reports_duplicates() {
        let report = star_adversary(&ConstantZero, 4).unwrap();
        let AdversaryOutcome::Violation(v) = &report.outcome else {
            panic!("expected a violation")
        };
        assert_eq!(v.kind, ViolationKind::DuplicateTimestamps);
        assert!(v.oracle_concurrent);
    }

    #[test]
    fn star_clock_is_out_of_scope() {
        assert_eq!(
            star_adversary(&StarVectorClock, 4).unwrap_err(),
            SimError::CandidateVectorTooLong { len: 3, max: 2 }
        );
    }

    #[test]
    fn truncated_at_n_minus_one_is_out_of_scope() {
        assert_eq!(
            star_adversary(&TruncatedVectorClock { s: 2 }, 3).unwrap_err(),
            SimError::CandidateVectorTooLong { len: 2, max: 1 }
        );
    }

    #[test]
    fn full_vclock_is_out_of_scope() {
        assert!(matches!(
            star_adversary(&FullVectorClock, 5),
            Err(SimError::CandidateVectorTooLong { len: 5, max: 3 })
        ));
    }

    /// A best-effort candidate with distinct stamps: radials with a slot
    /// bump it to integers, the center nudges every slot by midpoints.
    /// It survives the duplicate check, so the adversary must beat it
    /// with the classic dominated-victim pair.
    struct HalfStepCentral {
        s: usize,
    }

    struct HalfStepState {
        state: VectorTimestamp,
        role: Role,
    }

    enum Role {
        Central,
        RadialWithSlot(usize),
        RadialUnslotted,
    }

    impl crate::sim::online::OnlineClock for HalfStepState {
        fn on_event(
            &mut self,
            kind: StepKind,
            piggyback: Option<&VectorTimestamp>,
        ) -> Result<(VectorTimestamp, Option<VectorTimestamp>), SimError> {
            if let Some(v) = piggyback {
                self.state.merge_max(v)?;
            }
            match self.role {
                Role::Central => {
                    for j in 0..self.state.len() {
                        let v = self.state.get(j);
                        self.state
                            .set(j, v.midpoint(Rat::from_int(v.next_integer())));
                    }
                }
                Role::RadialWithSlot(j) => {
                    let v = self.state.get(j);
                    self.state.set(j, Rat::from_int(v.next_integer()));
                }
                Role::RadialUnslotted => {}
            }
            let stamp = self.state.clone();
            let out = matches!(kind, StepKind::Send).then(|| stamp.clone());
            Ok((stamp, out))
        }
    }

    impl OnlineTimestamper for HalfStepCentral {
        fn name(&self) -> String {
            format!("half-step-central:{}", self.s)
        }

        fn vector_len(&self, _n: usize) -> usize {
            self.s
        }

        fn make(
            &self,
            _n: usize,
            proc: ProcessId,
            _graph: &CommunicationGraph,
        ) -> Result<Box<dyn crate::sim::online::OnlineClock>, SimError> {
            let role = if proc.0 == 0 {
                Role::Central
            } else if proc.0 <= self.s {
                Role::RadialWithSlot(proc.0 - 1)
            } else {
                Role::RadialUnslotted
            };
            Ok(Box::new(HalfStepState {
                state: VectorTimestamp::zeros(self.s),
                role,
            }))
        }
    }

    #[test]
    fn distinct_stamp_candidate_loses_on_the_classic_pair() {
        let report = star_adversary(&HalfStepCentral { s: 2 }, 4).unwrap();
        let AdversaryOutcome::Violation(v) = &report.outcome else {
            panic!("expected a violation")
        };
        assert_eq!(v.kind, ViolationKind::OrderClaimOnConcurrent);
        assert!(v.oracle_concurrent);
        // The victim's first send against one of the center's receives.
        assert_eq!(v.first, EventId::new(report.victim, 1));
        assert_eq!(v.first_stamp, VectorTimestamp::zeros(2));
    }
}
