//! Scenario scripts: the declarative input format of the simulator.
//!
//! A script fixes the communication graph, how the cover is obtained,
//! every send/compute action with its per-message delay, the control
//! channel delays, and the timestamp queries to issue. Everything is
//! exact rationals, so a script pins one execution bit-for-bit.

use serde::{Deserialize, Serialize};

use crate::graph::{CommunicationGraph, CoverMode, CoverSet, ProcessId};
use crate::rat::Rat;

use super::SimError;

/// How the scenario obtains its vertex cover: computed in the named mode,
/// or given explicitly as a member list (validated against the graph).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoverSpec {
    Mode(CoverMode),
    Given(Vec<ProcessId>),
}

impl Default for CoverSpec {
    fn default() -> CoverSpec {
        CoverSpec::Mode(CoverMode::Exact)
    }
}

impl CoverSpec {
    pub fn resolve(&self, graph: &CommunicationGraph) -> Result<CoverSet, SimError> {
        match self {
            CoverSpec::Mode(mode) => Ok(graph.vertex_cover(*mode)?),
            CoverSpec::Given(members) => Ok(graph.cover_from_members(members)?),
        }
    }
}

/// Graph fragment of a scenario file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub processes: usize,
    pub edges: Vec<(usize, usize)>,
    #[serde(default)]
    pub cover: CoverSpec,
}

impl GraphSpec {
    pub fn build(&self) -> Result<CommunicationGraph, SimError> {
        let edges = self
            .edges
            .iter()
            .map(|&(a, b)| (ProcessId(a), ProcessId(b)));
        Ok(CommunicationGraph::new(self.processes, edges)?)
    }

    pub fn from_graph(graph: &CommunicationGraph, cover: CoverSpec) -> GraphSpec {
        GraphSpec {
            processes: graph.process_count(),
            edges: graph.edges().map(|(a, b)| (a.0, b.0)).collect(),
            cover,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ActionKind {
    Send { to: ProcessId, delay: Rat },
    Compute,
}

/// One scripted local step of a process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    pub at: Rat,
    pub proc: ProcessId,
    #[serde(flatten)]
    pub kind: ActionKind,
}

/// A scripted timestamp query: the `event`-th event of `proc`, issued at
/// simulated time `at`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuerySpec {
    pub proc: ProcessId,
    pub event: u32,
    pub at: Rat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairDelay {
    pub from: ProcessId,
    pub to: ProcessId,
    pub delay: Rat,
}

/// Delay of the control channel, uniform or per (cover, sender) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ControlDelay {
    Uniform(Rat),
    PerPair { default: Rat, pairs: Vec<PairDelay> },
}

impl Default for ControlDelay {
    fn default() -> ControlDelay {
        ControlDelay::Uniform(Rat::ONE)
    }
}

impl ControlDelay {
    pub fn delay(&self, from: ProcessId, to: ProcessId) -> Rat {
        match self {
            ControlDelay::Uniform(d) => *d,
            ControlDelay::PerPair { default, pairs } => pairs
                .iter()
                .find(|p| p.from == from && p.to == to)
                .map(|p| p.delay)
                .unwrap_or(*default),
        }
    }

    fn delays(&self) -> Vec<Rat> {
        match self {
            ControlDelay::Uniform(d) => vec![*d],
            ControlDelay::PerPair { default, pairs } => {
                let mut out = vec![*default];
                out.extend(pairs.iter().map(|p| p.delay));
                out
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioScript {
    #[serde(default)]
    pub name: String,
    pub graph: GraphSpec,
    #[serde(default)]
    pub control_delay: ControlDelay,
    #[serde(default)]
    pub actions: Vec<Action>,
    #[serde(default)]
    pub queries: Vec<QuerySpec>,
}

impl ScenarioScript {
    pub fn from_json(text: &str) -> Result<ScenarioScript, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::Script(format!("parse error: {e}")))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Validates the script and returns its communication graph.
    ///
    /// Checks: the graph is well-formed, all delays are positive, action
    /// times are non-negative and strictly increasing per process, send
    /// targets respect edges, and query times are non-negative.
    pub fn validate(&self) -> Result<CommunicationGraph, SimError> {
        let graph = self.graph.build()?;
        let n = graph.process_count();
        let mut last_at: Vec<Option<Rat>> = vec![None; n];
        for (i, action) in self.actions.iter().enumerate() {
            let who = action.proc;
            if who.0 >= n {
                return Err(SimError::Script(format!(
                    "action {i}: process {who} out of range"
                )));
            }
            if action.at.is_negative() {
                return Err(SimError::Script(format!(
                    "action {i}: negative time {}",
                    action.at
                )));
            }
            if let Some(prev) = last_at[who.0] {
                if action.at <= prev {
                    return Err(SimError::Script(format!(
                        "action {i}: time {} at {who} does not increase past {prev}",
                        action.at
                    )));
                }
            }
            last_at[who.0] = Some(action.at);
            if let ActionKind::Send { to, delay } = action.kind {
                if to.0 >= n {
                    return Err(SimError::Script(format!(
                        "action {i}: send target {to} out of range"
                    )));
                }
                if !graph.has_edge(who, to) {
                    return Err(SimError::Script(format!(
                        "action {i}: no channel between {who} and {to}"
                    )));
                }
                if delay <= Rat::ZERO {
                    return Err(SimError::Script(format!(
                        "action {i}: message delay {delay} must be positive"
                    )));
                }
            }
        }
        for d in self.control_delay.delays() {
            if d <= Rat::ZERO {
                return Err(SimError::Script(format!(
                    "control delay {d} must be positive"
                )));
            }
        }
        for (i, q) in self.queries.iter().enumerate() {
            if q.proc.0 >= n {
                return Err(SimError::Script(format!(
                    "query {i}: process {} out of range",
                    q.proc
                )));
            }
            if q.at.is_negative() || q.event == 0 {
                return Err(SimError::Script(format!(
                    "query {i}: invalid time or index"
                )));
            }
        }
        Ok(graph)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn send(at: i64, proc: usize, to: usize, delay: i64) -> Action {
        Action {
            at: Rat::from_int(at),
            proc: ProcessId(proc),
            kind: ActionKind::Send {
                to: ProcessId(to),
                delay: Rat::from_int(delay),
            },
        }
    }

    fn base_script() -> ScenarioScript {
        ScenarioScript {
            name: "test".into(),
            graph: GraphSpec {
                processes: 3,
                edges: vec![(0, 1), (0, 2)],
                cover: CoverSpec::default(),
            },
            control_delay: ControlDelay::default(),
            actions: vec![send(1, 1, 0, 2)],
            queries: vec![],
        }
    }

    #[test]
    fn valid_script_passes() {
        assert!(base_script().validate().is_ok());
    }

    #[test]
    fn zero_delay_rejected() {
        let mut s = base_script();
        s.actions = vec![send(1, 1, 0, 0)];
        assert!(matches!(s.validate(), Err(SimError::Script(_))));
    }

    #[test]
    fn non_increasing_times_rejected() {
        let mut s = base_script();
        s.actions = vec![send(2, 1, 0, 1), send(2, 1, 0, 1)];
        assert!(matches!(s.validate(), Err(SimError::Script(_))));
    }

    #[test]
    fn send_off_edge_rejected() {
        let mut s = base_script();
        s.actions = vec![send(1, 1, 2, 1)];
        assert!(matches!(s.validate(), Err(SimError::Script(_))));
    }

    #[test]
    fn cover_spec_parses_both_forms() {
        let s: CoverSpec = serde_json::from_str("\"exact\"").unwrap();
        assert_eq!(s, CoverSpec::Mode(CoverMode::Exact));
        let s: CoverSpec = serde_json::from_str("[0, 1]").unwrap();
        assert_eq!(s, CoverSpec::Given(vec![ProcessId(0), ProcessId(1)]));
    }

    #[test]
    fn script_round_trips_through_json() {
        let s = base_script();
        let text = s.to_json_pretty();
        let back = ScenarioScript::from_json(&text).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn control_delay_per_pair_lookup() {
        let d = ControlDelay::PerPair {
            default: Rat::ONE,
            pairs: vec![PairDelay {
                from: ProcessId(0),
                to: ProcessId(2),
                delay: Rat::new(1, 2),
            }],
        };
        assert_eq!(d.delay(ProcessId(0), ProcessId(2)), Rat::new(1, 2));
        assert_eq!(d.delay(ProcessId(0), ProcessId(1)), Rat::ONE);
    }
}
