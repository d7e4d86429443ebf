//! Scenario generators: the adversarial executions and seeded fuzzing.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::graph::{CommunicationGraph, ProcessId};
use crate::rat::Rat;

use super::scenario::{
    Action, ActionKind, ControlDelay, CoverSpec, GraphSpec, QuerySpec, ScenarioScript,
};
use super::SimError;

/// The concurrent-sends star execution: every radial process sends one
/// message to the center, nothing else happens, and `last_sender`'s
/// message is delivered last. `delivery_order` lists all radials in the
/// order their messages reach the center.
pub fn gen_star_concurrent(
    n: usize,
    delivery_order: &[ProcessId],
    last_sender: ProcessId,
) -> Result<ScenarioScript, SimError> {
    if n < 3 {
        return Err(SimError::Script(format!(
            "star scenario needs n >= 3, got {n}"
        )));
    }
    if last_sender.0 == 0 || last_sender.0 >= n {
        return Err(SimError::BadProcess(
            last_sender,
            "the last sender must be a radial process".into(),
        ));
    }
    let mut seen = vec![false; n];
    for p in delivery_order {
        if p.0 == 0 || p.0 >= n || seen[p.0] {
            return Err(SimError::BadProcess(
                *p,
                "delivery order must be a permutation of the radial processes".into(),
            ));
        }
        seen[p.0] = true;
    }
    if delivery_order.len() != n - 1 || delivery_order.last() != Some(&last_sender) {
        return Err(SimError::BadProcess(
            last_sender,
            "delivery order must list every radial once, the last sender last".into(),
        ));
    }

    // Radial p_i sends at time i; the q-th delivered message arrives at
    // time n + q.
    let actions = delivery_order
        .iter()
        .enumerate()
        .map(|(q, &sender)| {
            let at = Rat::from_int(sender.0 as i64);
            let arrival = Rat::from_int((n + q) as i64);
            Action {
                at,
                proc: sender,
                kind: ActionKind::Send {
                    to: ProcessId(0),
                    delay: arrival - at,
                },
            }
        })
        .collect();

    Ok(ScenarioScript {
        name: format!("star-concurrent-n{n}-last{}", last_sender.0),
        graph: GraphSpec::from_graph(&CommunicationGraph::star(n), CoverSpec::default()),
        control_delay: ControlDelay::default(),
        actions,
        queries: Vec::new(),
    })
}

/// Time granule separating events that are nominally simultaneous.
/// Accumulated drift stays far below any channel delay for the step
/// counts the generators allow.
const TICK: Rat = Rat::new_raw(1, 1 << 20);

/// Maximum diameter over all connected one-vertex-deleted subgraphs.
fn deleted_vertex_diameter(g: &CommunicationGraph) -> i64 {
    let mut best = 0;
    for removed in g.processes() {
        if let Some(d) = subgraph_diameter(g, removed) {
            best = best.max(d);
        }
    }
    best
}

/// Diameter of `g` minus one vertex, `None` if that subgraph is
/// disconnected or empty.
fn subgraph_diameter(g: &CommunicationGraph, removed: ProcessId) -> Option<i64> {
    let alive: Vec<ProcessId> = g.processes().filter(|&p| p != removed).collect();
    if alive.is_empty() {
        return None;
    }
    let mut best = 0i64;
    for &start in &alive {
        let mut dist = vec![-1i64; g.process_count()];
        dist[start.0] = 0;
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(p) = queue.pop_front() {
            for q in g.neighbors(p) {
                if q != removed && dist[q.0] < 0 {
                    dist[q.0] = dist[p.0] + 1;
                    queue.push_back(q);
                }
            }
        }
        for &p in &alive {
            if dist[p.0] < 0 {
                return None;
            }
            best = best.max(dist[p.0]);
        }
    }
    Some(best)
}

/// Builds the flooding execution: every process sends to all neighbors,
/// every delivery is forwarded to all other neighbors, and every channel
/// of `slow` is slower than `2 * fast_delay * D`, where `D` is the
/// largest diameter of the connected one-vertex-deleted subgraphs. Sends
/// whose nominal time exceeds `horizon` are dropped.
pub fn gen_flooding(
    g: &CommunicationGraph,
    slow: ProcessId,
    fast_delay: Rat,
    horizon: Rat,
) -> Result<ScenarioScript, SimError> {
    if !g.is_connected() {
        return Err(SimError::Graph(crate::graph::GraphError::Disconnected));
    }
    if slow.0 >= g.process_count() {
        return Err(SimError::BadProcess(
            slow,
            "slow process out of range".into(),
        ));
    }
    if fast_delay <= Rat::ZERO {
        return Err(SimError::Script("fast delay must be positive".into()));
    }
    if horizon.is_negative() {
        return Err(SimError::Script("horizon must be non-negative".into()));
    }
    let diameter = deleted_vertex_diameter(g);
    let slow_delay = Rat::from_int(2) * fast_delay * Rat::from_int(diameter) + Rat::ONE;
    let channel_delay = |a: ProcessId, b: ProcessId| {
        if a == slow || b == slow {
            slow_delay
        } else {
            fast_delay
        }
    };

    // Internal replay of the flood. Nominal times follow the proof
    // exactly (forwarding is instantaneous); each popped step is nudged
    // by one tick so that all event times are distinct and per-process
    // strictly increasing. A send action's delay is fixed once its
    // delivery pops, so the script reproduces these exact times.
    #[derive(PartialEq, Eq, PartialOrd, Ord)]
    struct Item {
        nominal: Rat,
        seq: u64,
    }
    enum Payload {
        Send {
            from: ProcessId,
            to: ProcessId,
        },
        Deliver {
            action: usize,
            to: ProcessId,
            from: ProcessId,
        },
    }

    let mut heap: BinaryHeap<Reverse<(Item, usize)>> = BinaryHeap::new();
    let mut payloads: Vec<Payload> = Vec::new();
    let mut seq = 0u64;
    let mut push = |heap: &mut BinaryHeap<Reverse<(Item, usize)>>,
                    payloads: &mut Vec<Payload>,
                    nominal: Rat,
                    payload: Payload| {
        payloads.push(payload);
        seq += 1;
        heap.push(Reverse((Item { nominal, seq }, payloads.len() - 1)));
    };

    for p in g.processes() {
        for nb in g.neighbors(p) {
            if Rat::ZERO <= horizon {
                push(
                    &mut heap,
                    &mut payloads,
                    Rat::ZERO,
                    Payload::Send { from: p, to: nb },
                );
            }
        }
    }

    const POP_LIMIT: u64 = 100_000;
    let mut actions: Vec<Action> = Vec::new();
    let mut pops = 0u64;
    while let Some(Reverse((item, payload))) = heap.pop() {
        pops += 1;
        if pops > POP_LIMIT {
            return Err(SimError::Script(format!(
                "flooding exceeds {POP_LIMIT} steps; lower the horizon"
            )));
        }
        let actual = item.nominal + Rat::from_int(pops as i64) * TICK;
        match payloads[payload] {
            Payload::Send { from, to } => {
                let action = actions.len();
                actions.push(Action {
                    at: actual,
                    proc: from,
                    // Patched when the delivery pops.
                    kind: ActionKind::Send {
                        to,
                        delay: Rat::ONE,
                    },
                });
                push(
                    &mut heap,
                    &mut payloads,
                    item.nominal + channel_delay(from, to),
                    Payload::Deliver { action, to, from },
                );
            }
            Payload::Deliver { action, to, from } => {
                let send_at = actions[action].at;
                let ActionKind::Send { delay, .. } = &mut actions[action].kind else {
                    unreachable!("delivery references a send action")
                };
                *delay = actual - send_at;
                for nb in g.neighbors(to) {
                    if nb != from && item.nominal <= horizon {
                        push(
                            &mut heap,
                            &mut payloads,
                            item.nominal,
                            Payload::Send { from: to, to: nb },
                        );
                    }
                }
            }
        }
    }

    actions.sort_by_key(|a| a.at);
    Ok(ScenarioScript {
        name: format!("flooding-n{}-slow{}", g.process_count(), slow.0),
        graph: GraphSpec::from_graph(g, CoverSpec::default()),
        control_delay: ControlDelay::default(),
        actions,
        queries: Vec::new(),
    })
}

/// Knobs of the seeded random scenario generator.
#[derive(Debug, Clone)]
pub struct RandomScenarioConfig {
    pub n: usize,
    /// Rough number of trace events (sends count twice: the receive is
    /// implied).
    pub target_events: usize,
    /// Edge probability of the connected Erdős–Rényi graph.
    pub edge_prob: f64,
    /// Force a star topology (for the star algorithm).
    pub star_only: bool,
    /// Number of scripted queries to sprinkle in.
    pub queries: usize,
    pub seed: u64,
}

impl Default for RandomScenarioConfig {
    fn default() -> RandomScenarioConfig {
        RandomScenarioConfig {
            n: 5,
            target_events: 30,
            edge_prob: 0.45,
            star_only: false,
            queries: 2,
            seed: 0,
        }
    }
}

fn random_connected_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> CommunicationGraph {
    loop {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen_bool(p) {
                    edges.push((ProcessId(i), ProcessId(j)));
                }
            }
        }
        let g = CommunicationGraph::new(n, edges).expect("generated edges are in range");
        if g.is_connected() {
            return g;
        }
    }
}

/// Seeded random scenario over a connected graph: mixed sends and
/// computes with per-message delays off a rational grid, arrival times
/// kept collision-free by unique sub-integer offsets.
pub fn gen_random(config: &RandomScenarioConfig) -> ScenarioScript {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.n.max(2);
    let graph = if config.star_only {
        CommunicationGraph::star(n.max(3))
    } else {
        random_connected_graph(&mut rng, n, config.edge_prob)
    };
    let n = graph.process_count();

    let mut actions = Vec::new();
    let mut next_slot = vec![1i64; n];
    let mut msg_seq = 1i64;
    let mut planned_events = 0usize;
    while planned_events < config.target_events {
        let proc = ProcessId(rng.gen_range(0..n));
        let at = Rat::from_int(next_slot[proc.0]);
        next_slot[proc.0] += 1;
        let neighbors = graph.neighbors(proc);
        if !neighbors.is_empty() && rng.gen_bool(0.65) {
            let to = neighbors[rng.gen_range(0..neighbors.len())];
            // Grid delay in halves plus a unique tick, so no two
            // deliveries (or a delivery and a scripted action) collide.
            let base = Rat::new(rng.gen_range(1..=6), 2);
            let delay = base + Rat::from_int(msg_seq) * TICK;
            msg_seq += 1;
            actions.push(Action {
                at,
                proc,
                kind: ActionKind::Send { to, delay },
            });
            planned_events += 2;
        } else {
            actions.push(Action {
                at,
                proc,
                kind: ActionKind::Compute,
            });
            planned_events += 1;
        }
    }
    actions.sort_by_key(|a| (a.at, a.proc));

    // Quiet time by which every message and control has settled.
    let settle = Rat::from_int(next_slot.iter().max().copied().unwrap_or(1) + 8);
    let mut queries = Vec::new();
    let events_of = |p: usize| actions.iter().filter(|a| a.proc.0 == p).count() as u32;
    for q in 0..config.queries {
        let proc = ProcessId(rng.gen_range(0..n));
        let planned = events_of(proc.0);
        if planned == 0 {
            continue;
        }
        let event = rng.gen_range(1..=planned);
        let at = if q % 2 == 0 {
            settle
        } else {
            Rat::from_int(rng.gen_range(1..=next_slot[proc.0])) + Rat::new(1, 3)
        };
        queries.push(QuerySpec { proc, event, at });
    }

    ScenarioScript {
        name: format!("random-n{}-seed{}", n, config.seed),
        graph: GraphSpec::from_graph(&graph, CoverSpec::default()),
        control_delay: ControlDelay::Uniform(Rat::new(rng.gen_range(1..=4), 2)),
        actions,
        queries,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::execution::EventId;
    use crate::sim::{run, Algo};

    #[test]
    fn star_concurrent_shape_and_concurrency() {
        let order = [ProcessId(1), ProcessId(2), ProcessId(3)];
        let script = gen_star_concurrent(4, &order, ProcessId(3)).unwrap();
        let out = run(&script, Algo::VClock).unwrap();
        // The last sender's first event is concurrent with the center's
        // second receive.
        let e13 = EventId::new(ProcessId(3), 1);
        let e02 = EventId::new(ProcessId(0), 2);
        assert!(out.trace.concurrent(e13, e02).unwrap());
        // All radial first sends are pairwise concurrent.
        for i in 1..4 {
            for j in 1..4 {
                if i != j {
                    assert!(out
                        .trace
                        .concurrent(EventId::new(ProcessId(i), 1), EventId::new(ProcessId(j), 1))
                        .unwrap());
                }
            }
        }
    }

    #[test]
    fn star_concurrent_counts_for_n3() {
        let order = [ProcessId(1), ProcessId(2)];
        let script = gen_star_concurrent(3, &order, ProcessId(2)).unwrap();
        let out = run(&script, Algo::VClock).unwrap();
        assert_eq!(out.trace.event_count(), 4);
    }

    #[test]
    fn star_concurrent_rejects_central_last_sender() {
        let order = [ProcessId(1), ProcessId(2), ProcessId(0)];
        assert!(matches!(
            gen_star_concurrent(4, &order, ProcessId(0)),
            Err(SimError::BadProcess(..))
        ));
    }

    #[test]
    fn flooding_complete4_isolates_the_slow_process() {
        let g = CommunicationGraph::complete(4);
        let slow = ProcessId(3);
        let script = gen_flooding(&g, slow, Rat::ONE, Rat::from_int(3)).unwrap();
        let out = run(&script, Algo::VClock).unwrap();
        let trace = &out.trace;
        // D = diam(K3) = 1; checkpoint strictly between the fast flood
        // completion (delta * D plus drift) and the slow channels (> 2).
        let checkpoint = Rat::new(3, 2);
        for a in 0..3 {
            for b in 0..3 {
                if a == b {
                    continue;
                }
                let origin = EventId::new(ProcessId(a), 1);
                let held = trace
                    .events_at(ProcessId(b))
                    .iter()
                    .any(|e| e.at <= checkpoint && trace.happened_before(origin, e.id()).unwrap());
                assert!(held, "p{b} misses p{a}'s flood by {checkpoint}");
            }
        }
        let slow_origin = EventId::new(slow, 1);
        for b in 0..3 {
            let held = trace
                .events_at(ProcessId(b))
                .iter()
                .any(|e| e.at <= checkpoint && trace.happened_before(slow_origin, e.id()).unwrap());
            assert!(!held, "p{b} saw the slow flood too early");
        }
    }

    #[test]
    fn flooding_runs_even_when_slow_is_a_cut_vertex() {
        let g = CommunicationGraph::path(3);
        let script = gen_flooding(&g, ProcessId(1), Rat::ONE, Rat::from_int(2)).unwrap();
        let out = run(&script, Algo::VClock).unwrap();
        assert!(out.trace.event_count() > 0);
    }

    #[test]
    fn flooding_horizon_zero_keeps_only_initial_sends() {
        let g = CommunicationGraph::complete(3);
        let script = gen_flooding(&g, ProcessId(2), Rat::ONE, Rat::ZERO).unwrap();
        // Every action is one of the n * deg initial sends at nominal 0.
        assert_eq!(script.actions.len(), 6);
        assert!(script.actions.iter().all(|a| a.at < Rat::ONE));
    }

    #[test]
    fn random_scenarios_validate_and_run() {
        for seed in 0..10 {
            let config = RandomScenarioConfig {
                n: 6,
                target_events: 25,
                seed,
                ..Default::default()
            };
            let script = gen_random(&config);
            script.validate().expect("generated script validates");
            let out = run(&script, Algo::Inline).unwrap();
            assert!(out.trace.event_count() >= 20);
        }
    }

    #[test]
    fn random_generation_is_seed_deterministic() {
        let config = RandomScenarioConfig {
            n: 5,
            target_events: 20,
            seed: 9,
            ..Default::default()
        };
        let a = gen_random(&config);
        let b = gen_random(&config);
        assert_eq!(a, b);
    }
}
