//! Communication graphs, vertex covers, connectivity and cut facts.
//!
//! A graph here is the static topology of a message-passing system:
//! undirected edges between process vertices, no self-loops. Cover
//! computation supports an exact mode (subset enumeration, desk scale)
//! and the maximal-matching greedy 2-approximation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of a process, an integer in `[0, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProcessId(pub usize);

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// Largest process count accepted by the exact cover / connectivity
/// enumerations. Beyond this the exact mode errors instead of silently
/// degrading.
pub const EXACT_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("self-loop on {0}")]
    SelfLoop(ProcessId),
    #[error("edge endpoint {0} out of range for {1} processes")]
    EndpointOutOfRange(ProcessId, usize),
    #[error("exact mode limited to {EXACT_LIMIT} processes, got {0}")]
    TooLargeForExact(usize),
    #[error("graph is disconnected")]
    Disconnected,
    #[error("operation requires vertex connectivity 1, graph has {0}")]
    NotConnectivityOne(usize),
    #[error("set {{{0}}} is not a vertex cover")]
    NotACover(String),
    #[error("need at least {0} processes")]
    TooFewProcesses(usize),
}

/// Undirected communication graph over processes `p0 .. p(n-1)`.
///
/// Edges are stored as normalized `(lo, hi)` pairs, so the edge set is
/// symmetric by construction. Immutable after validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommunicationGraph {
    n: usize,
    edges: BTreeSet<(ProcessId, ProcessId)>,
}

impl CommunicationGraph {
    /// Builds and validates a graph. Rejects self-loops and out-of-range
    /// endpoints.
    pub fn new(
        n: usize,
        edges: impl IntoIterator<Item = (ProcessId, ProcessId)>,
    ) -> Result<CommunicationGraph, GraphError> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            for p in [a, b] {
                if p.0 >= n {
                    return Err(GraphError::EndpointOutOfRange(p, n));
                }
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(CommunicationGraph { n, edges: set })
    }

    /// Star graph: `p0` central, `p1..p(n-1)` radial.
    pub fn star(n: usize) -> CommunicationGraph {
        let edges = (1..n).map(|i| (ProcessId(0), ProcessId(i)));
        CommunicationGraph::new(n, edges).expect("star is well-formed")
    }

    /// Complete graph on `n` processes.
    pub fn complete(n: usize) -> CommunicationGraph {
        let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (ProcessId(i), ProcessId(j))));
        CommunicationGraph::new(n, edges).expect("complete graph is well-formed")
    }

    /// Cycle `p0 - p1 - ... - p(n-1) - p0`.
    pub fn cycle(n: usize) -> CommunicationGraph {
        assert!(n >= 3, "cycle needs at least 3 vertices");
        let edges = (0..n).map(|i| (ProcessId(i), ProcessId((i + 1) % n)));
        CommunicationGraph::new(n, edges).expect("cycle is well-formed")
    }

    /// Path `p0 - p1 - ... - p(n-1)`.
    pub fn path(n: usize) -> CommunicationGraph {
        let edges = (1..n).map(|i| (ProcessId(i - 1), ProcessId(i)));
        CommunicationGraph::new(n, edges).expect("path is well-formed")
    }

    pub fn process_count(&self) -> usize {
        self.n
    }

    pub fn processes(&self) -> impl Iterator<Item = ProcessId> {
        (0..self.n).map(ProcessId)
    }

    pub fn edges(&self) -> impl Iterator<Item = (ProcessId, ProcessId)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: ProcessId, b: ProcessId) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn neighbors(&self, p: ProcessId) -> Vec<ProcessId> {
        self.processes()
            .filter(|&q| q != p && self.has_edge(p, q))
            .collect()
    }

    pub fn degree(&self, p: ProcessId) -> usize {
        self.neighbors(p).len()
    }

    /// True iff every edge has at least one endpoint in `s`.
    pub fn is_cover(&self, s: &BTreeSet<ProcessId>) -> bool {
        self.edges
            .iter()
            .all(|&(a, b)| s.contains(&a) || s.contains(&b))
    }

    /// Whether the whole graph is one connected component. The empty and
    /// single-vertex graphs count as connected.
    pub fn is_connected(&self) -> bool {
        self.connected_ignoring(&BTreeSet::new())
    }

    /// Connectivity of the subgraph obtained by removing `removed`.
    /// A subgraph with at most one remaining vertex counts as connected.
    fn connected_ignoring(&self, removed: &BTreeSet<ProcessId>) -> bool {
        let alive: Vec<ProcessId> = self.processes().filter(|p| !removed.contains(p)).collect();
        if alive.len() <= 1 {
            return true;
        }
        let mut seen = BTreeSet::new();
        let mut stack = vec![alive[0]];
        seen.insert(alive[0]);
        while let Some(p) = stack.pop() {
            for q in self.neighbors(p) {
                if !removed.contains(&q) && seen.insert(q) {
                    stack.push(q);
                }
            }
        }
        seen.len() == alive.len()
    }

    /// Size of the minimum vertex cut, by convention `n - 1` for complete
    /// graphs. Requires a connected graph with at least two processes.
    pub fn vertex_connectivity(&self) -> Result<usize, GraphError> {
        if self.n < 2 {
            return Err(GraphError::TooFewProcesses(2));
        }
        if !self.is_connected() {
            return Err(GraphError::Disconnected);
        }
        if self.edge_count() == self.n * (self.n - 1) / 2 {
            return Ok(self.n - 1);
        }
        // Smallest removal set that disconnects the rest, by enumeration.
        for k in 1..self.n - 1 {
            let mut found = false;
            for_each_subset(self.n, k, &mut |subset| {
                if !found && !self.connected_ignoring(subset) {
                    found = true;
                }
            });
            if found {
                return Ok(k);
            }
        }
        Ok(self.n - 1)
    }

    /// The set `X` of processes that are not individually cut vertices,
    /// defined for connected graphs of vertex connectivity 1.
    pub fn non_cut_set(&self) -> Result<BTreeSet<ProcessId>, GraphError> {
        let kappa = self.vertex_connectivity()?;
        if kappa != 1 {
            return Err(GraphError::NotConnectivityOne(kappa));
        }
        Ok(self.non_cut_processes())
    }

    /// Processes whose individual removal leaves the rest connected.
    /// Generic helper, no connectivity precondition.
    pub fn non_cut_processes(&self) -> BTreeSet<ProcessId> {
        self.processes()
            .filter(|&p| self.connected_ignoring(&BTreeSet::from([p])))
            .collect()
    }

    /// Computes a vertex cover in the requested mode.
    pub fn vertex_cover(&self, mode: CoverMode) -> Result<CoverSet, GraphError> {
        match mode {
            CoverMode::Exact => self.exact_cover(),
            CoverMode::Greedy => Ok(self.greedy_cover()),
        }
    }

    /// Minimum cover, by enumerating subsets in order of size.
    fn exact_cover(&self) -> Result<CoverSet, GraphError> {
        if self.n > EXACT_LIMIT {
            return Err(GraphError::TooLargeForExact(self.n));
        }
        for k in 0..=self.n {
            let mut best: Option<BTreeSet<ProcessId>> = None;
            for_each_subset(self.n, k, &mut |subset| {
                if best.is_none() && self.is_cover(subset) {
                    best = Some(subset.clone());
                }
            });
            if let Some(members) = best {
                return Ok(CoverSet::from_ordered(members.into_iter().collect()));
            }
        }
        unreachable!("the full process set always covers")
    }

    /// Maximal-matching 2-approximation: pick an uncovered edge, take both
    /// endpoints. Edges visited in sorted order, so the result is
    /// deterministic.
    fn greedy_cover(&self) -> CoverSet {
        let mut members = BTreeSet::new();
        for &(a, b) in &self.edges {
            if !members.contains(&a) && !members.contains(&b) {
                members.insert(a);
                members.insert(b);
            }
        }
        CoverSet::from_ordered(members.into_iter().collect())
    }

    /// Validates an externally supplied cover and fixes its slot order.
    pub fn cover_from_members(&self, members: &[ProcessId]) -> Result<CoverSet, GraphError> {
        let mut seen = BTreeSet::new();
        let mut ordered = Vec::new();
        for &p in members {
            if p.0 >= self.n {
                return Err(GraphError::EndpointOutOfRange(p, self.n));
            }
            if seen.insert(p) {
                ordered.push(p);
            }
        }
        if !self.is_cover(&seen) {
            let listing = ordered
                .iter()
                .map(|p| p.to_string())
                .collect::<Vec<_>>()
                .join(",");
            return Err(GraphError::NotACover(listing));
        }
        Ok(CoverSet::from_ordered(ordered))
    }
}

/// How a vertex cover is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoverMode {
    Exact,
    Greedy,
}

/// A vertex cover together with the slot renaming used by the cover-based
/// timestamp algorithms: cover member at position `j` plays the part of
/// the `j`-th clock slot, `0 <= j < c`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverSet {
    members: Vec<ProcessId>,
    #[serde(skip)]
    index: BTreeMap<ProcessId, usize>,
}

impl CoverSet {
    pub fn from_ordered(members: Vec<ProcessId>) -> CoverSet {
        let index = members.iter().enumerate().map(|(j, &p)| (p, j)).collect();
        CoverSet { members, index }
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn members(&self) -> &[ProcessId] {
        &self.members
    }

    pub fn member_set(&self) -> BTreeSet<ProcessId> {
        self.members.iter().copied().collect()
    }

    /// Slot position of a cover member, `None` for processes outside the
    /// cover.
    pub fn position(&self, p: ProcessId) -> Option<usize> {
        // Rebuild lazily when deserialized (index is not serialized).
        if self.index.is_empty() && !self.members.is_empty() {
            return self.members.iter().position(|&m| m == p);
        }
        self.index.get(&p).copied()
    }

    pub fn contains(&self, p: ProcessId) -> bool {
        self.position(p).is_some()
    }

    pub fn member_at(&self, position: usize) -> ProcessId {
        self.members[position]
    }
}

/// Calls `f` on every size-`k` subset of `{p0 .. p(n-1)}`.
fn for_each_subset(n: usize, k: usize, f: &mut impl FnMut(&BTreeSet<ProcessId>)) {
    fn rec(
        n: usize,
        k: usize,
        start: usize,
        current: &mut BTreeSet<ProcessId>,
        f: &mut impl FnMut(&BTreeSet<ProcessId>),
    ) {
        if current.len() == k {
            f(current);
            return;
        }
        let remaining = k - current.len();
        for i in start..=n.saturating_sub(remaining) {
            current.insert(ProcessId(i));
            rec(n, k, i + 1, current, f);
            current.remove(&ProcessId(i));
        }
    }
    if k > n {
        return;
    }
    rec(n, k, 0, &mut BTreeSet::new(), f);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn p(i: usize) -> ProcessId {
        ProcessId(i)
    }

    #[test]
    fn validate_accepts_star() {
        assert_eq!(CommunicationGraph::star(4).edge_count(), 3);
    }

    #[test]
    fn validate_rejects_self_loop() {
        let err = CommunicationGraph::new(4, [(p(2), p(2))]).unwrap_err();
        assert_eq!(err, GraphError::SelfLoop(p(2)));
    }

    #[test]
    fn validate_rejects_out_of_range() {
        let err = CommunicationGraph::new(4, [(p(0), p(9))]).unwrap_err();
        assert_eq!(err, GraphError::EndpointOutOfRange(p(9), 4));
    }

    #[test]
    fn is_cover_star_center() {
        let g = CommunicationGraph::star(4);
        assert!(g.is_cover(&BTreeSet::from([p(0)])));
    }

    #[test]
    fn is_cover_full_set() {
        let g = CommunicationGraph::cycle(5);
        assert!(g.is_cover(&g.processes().collect()));
    }

    #[test]
    fn is_cover_triangle_single_vertex_fails() {
        // Edge (1,2) has no endpoint in {p0}.
        let g = CommunicationGraph::complete(3);
        assert!(!g.is_cover(&BTreeSet::from([p(0)])));
    }

    #[test]
    fn exact_cover_star_is_center() {
        let g = CommunicationGraph::star(5);
        let cover = g.vertex_cover(CoverMode::Exact).unwrap();
        assert_eq!(cover.members(), &[p(0)]);
        assert_eq!(cover.position(p(0)), Some(0));
        assert_eq!(cover.position(p(3)), None);
    }

    #[test]
    fn exact_cover_empty_edges_is_empty() {
        let g = CommunicationGraph::new(4, []).unwrap();
        let cover = g.vertex_cover(CoverMode::Exact).unwrap();
        assert_eq!(cover.size(), 0);
    }

    /// Independent brute force: true minimum cover size by scanning all
    /// subsets without any ordering shortcuts.
    fn brute_min_cover(g: &CommunicationGraph) -> usize {
        let n = g.process_count();
        (0..1u32 << n)
            .filter(|mask| {
                let s: BTreeSet<ProcessId> = (0..n)
                    .filter(|i| mask & (1 << i) != 0)
                    .map(ProcessId)
                    .collect();
                g.is_cover(&s)
            })
            .map(|mask| mask.count_ones() as usize)
            .min()
            .unwrap()
    }

    #[test]
    fn exact_cover_cycle5_is_minimum() {
        let g = CommunicationGraph::cycle(5);
        assert_eq!(brute_min_cover(&g), 3);
        let cover = g.vertex_cover(CoverMode::Exact).unwrap();
        assert_eq!(cover.size(), 3);
        assert!(g.is_cover(&cover.member_set()));
    }

    #[test]
    fn exact_cover_rejects_large_graphs() {
        let g = CommunicationGraph::star(EXACT_LIMIT + 1);
        assert_eq!(
            g.vertex_cover(CoverMode::Exact).unwrap_err(),
            GraphError::TooLargeForExact(EXACT_LIMIT + 1)
        );
    }

    #[test]
    fn connectivity_star_is_one() {
        assert_eq!(
            CommunicationGraph::star(4).vertex_connectivity().unwrap(),
            1
        );
    }

    #[test]
    fn connectivity_complete_is_n_minus_one() {
        assert_eq!(
            CommunicationGraph::complete(4)
                .vertex_connectivity()
                .unwrap(),
            3
        );
    }

    #[test]
    fn connectivity_cycle5_is_two() {
        let g = CommunicationGraph::cycle(5);
        // Confirm by direct removal checks: no single vertex disconnects,
        // some pair does.
        for i in 0..5 {
            assert!(g.connected_ignoring(&BTreeSet::from([p(i)])));
        }
        assert!(!g.connected_ignoring(&BTreeSet::from([p(0), p(2)])));
        assert_eq!(g.vertex_connectivity().unwrap(), 2);
    }

    #[test]
    fn connectivity_rejects_disconnected() {
        let g = CommunicationGraph::new(4, [(p(0), p(1)), (p(2), p(3))]).unwrap();
        assert_eq!(
            g.vertex_connectivity().unwrap_err(),
            GraphError::Disconnected
        );
    }

    #[test]
    fn non_cut_set_star4_is_radials() {
        let g = CommunicationGraph::star(4);
        assert_eq!(g.non_cut_set().unwrap(), BTreeSet::from([p(1), p(2), p(3)]));
    }

    #[test]
    fn non_cut_set_path3_is_endpoints() {
        let g = CommunicationGraph::path(3);
        assert_eq!(g.non_cut_set().unwrap(), BTreeSet::from([p(0), p(2)]));
    }

    #[test]
    fn non_cut_set_two_processes() {
        // Either removal leaves a single vertex, which is connected.
        let g = CommunicationGraph::star(2);
        assert_eq!(g.non_cut_set().unwrap(), BTreeSet::from([p(0), p(1)]));
    }

    #[test]
    fn non_cut_set_requires_connectivity_one() {
        let g = CommunicationGraph::cycle(5);
        assert_eq!(
            g.non_cut_set().unwrap_err(),
            GraphError::NotConnectivityOne(2)
        );
    }

    #[test]
    fn cover_from_members_validates() {
        let g = CommunicationGraph::star(4);
        assert!(g.cover_from_members(&[p(0)]).is_ok());
        assert!(matches!(
            g.cover_from_members(&[p(1)]),
            Err(GraphError::NotACover(_))
        ));
    }

    #[test]
    fn star_facts_for_small_n() {
        for n in 3..=8 {
            let g = CommunicationGraph::star(n);
            assert_eq!(g.vertex_cover(CoverMode::Exact).unwrap().size(), 1);
            assert_eq!(g.vertex_connectivity().unwrap(), 1);
            assert_eq!(g.non_cut_set().unwrap().len(), n - 1);
        }
    }

    fn random_graph(rng: &mut StdRng, n: usize) -> CommunicationGraph {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen_bool(0.4) {
                    edges.push((p(i), p(j)));
                }
            }
        }
        CommunicationGraph::new(n, edges).unwrap()
    }

    #[test]
    fn cover_modes_bound_each_other_on_random_graphs() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..60 {
            let n = rng.gen_range(2..=10);
            let g = random_graph(&mut rng, n);
            let exact = g.vertex_cover(CoverMode::Exact).unwrap();
            let greedy = g.vertex_cover(CoverMode::Greedy).unwrap();
            assert!(g.is_cover(&exact.member_set()));
            assert!(g.is_cover(&greedy.member_set()));
            assert!(exact.size() <= greedy.size());
            assert!(greedy.size() <= 2 * exact.size());
            assert_eq!(exact.size(), brute_min_cover(&g));
        }
    }
}
