//! Cycle decompositions, minimal cycle covers and the balanced augmented
//! network built from a cover.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circulation::min_circulation;
use crate::constraint::{split_edges, ConstrainedNetwork, ConstraintError, EdgeMapping};
use crate::graph::DirectedGraph;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoverError {
    #[error("graph is not balanced")]
    NotBalanced,
    #[error("graph is not strongly connected")]
    NotStronglyConnected,
    #[error("edges {0:?} do not form a directed cycle")]
    NotACycle(Vec<usize>),
    #[error("edge {0} is not covered by any cycle")]
    Uncovered(usize),
    #[error("edge {edge}: expected {expected} breakpoints, got {got}")]
    BreakpointArity { edge: usize, expected: usize, got: usize },
    #[error("edge {edge}: copy assignment {assignment:?} is not a permutation of 0..{copies}")]
    BadAssignment { edge: usize, copies: usize, assignment: Vec<usize> },
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
}

/// Edge ids of a simple directed cycle in traversal order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DirectedCycle {
    edges: Vec<usize>,
}

impl DirectedCycle {
    pub fn new(graph: &DirectedGraph, edges: Vec<usize>) -> Result<Self, CoverError> {
        let bad = || CoverError::NotACycle(edges.clone());
        if edges.is_empty() || edges.iter().any(|&e| e >= graph.edge_count()) {
            return Err(bad());
        }
        let distinct: BTreeSet<_> = edges.iter().collect();
        if distinct.len() != edges.len() {
            return Err(bad());
        }
        for (k, &e) in edges.iter().enumerate() {
            let next = edges[(k + 1) % edges.len()];
            if graph.edge(e).head != graph.edge(next).tail {
                return Err(bad());
            }
        }
        Ok(Self { edges })
    }

    pub fn edges(&self) -> &[usize] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, edge: usize) -> bool {
        self.edges.contains(&edge)
    }

    fn edge_set(&self) -> Vec<usize> {
        let mut s = self.edges.clone();
        s.sort_unstable();
        s
    }
}

/// Cycles plus the per-edge count of cycles using each edge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleCover {
    pub cycles: Vec<DirectedCycle>,
    pub multiplicity: Vec<usize>,
}

impl CycleCover {
    pub fn from_cycles(graph: &DirectedGraph, cycles: Vec<DirectedCycle>) -> Self {
        let mut multiplicity = vec![0; graph.edge_count()];
        for c in &cycles {
            for &e in c.edges() {
                multiplicity[e] += 1;
            }
        }
        Self { cycles, multiplicity }
    }

    pub fn total_multiplicity(&self) -> usize {
        self.multiplicity.iter().sum()
    }

    pub fn covers_all_edges(&self) -> bool {
        self.multiplicity.iter().all(|&t| t >= 1)
    }

    pub fn is_partition(&self) -> bool {
        self.multiplicity.iter().all(|&t| t == 1)
    }

    /// Indices of the cycles containing `edge`, ascending.
    pub fn cycles_containing(&self, edge: usize) -> Vec<usize> {
        self.cycles
            .iter()
            .enumerate()
            .filter(|(_, c)| c.contains(edge))
            .map(|(j, _)| j)
            .collect()
    }

    /// Order-independent identity of the cover: sorted edge sets.
    pub fn canonical_key(&self) -> Vec<Vec<usize>> {
        let mut key: Vec<_> = self.cycles.iter().map(DirectedCycle::edge_set).collect();
        key.sort();
        key
    }
}

/// Peel simple cycles off the multigraph in which edge `i` appears
/// `count[i]` times. Walks always leave a vertex by its lowest-id unused
/// edge and every walk starts at the lowest-id unused edge.
fn peel_cycles(graph: &DirectedGraph, count: &[usize]) -> Result<Vec<Vec<usize>>, CoverError> {
    let mut remaining = count.to_vec();
    let out = graph.out_edges();
    let mut cursor = vec![0usize; graph.vertex_count()];
    let mut on_path: Vec<Option<usize>> = vec![None; graph.vertex_count()];
    let mut cycles = Vec::new();

    let next_out = |v: usize, remaining: &[usize], cursor: &mut [usize]| -> Option<usize> {
        while cursor[v] < out[v].len() {
            let e = out[v][cursor[v]];
            if remaining[e] > 0 {
                return Some(e);
            }
            cursor[v] += 1;
        }
        None
    };

    while let Some(start) = remaining.iter().position(|&r| r > 0) {
        let mut path: Vec<usize> = Vec::new();
        let mut v = graph.edge(start).tail;
        on_path[v] = Some(0);
        let mut e = start;
        loop {
            remaining[e] -= 1;
            path.push(e);
            v = graph.edge(e).head;
            if let Some(k) = on_path[v] {
                let cycle = path.split_off(k);
                for &ce in &cycle[1..] {
                    on_path[graph.edge(ce).tail] = None;
                }
                cycles.push(cycle);
                if path.is_empty() {
                    on_path[v] = None;
                    break;
                }
            } else {
                on_path[v] = Some(path.len());
            }
            e = match next_out(v, &remaining, &mut cursor) {
                Some(e) => e,
                None => return Err(CoverError::NotBalanced),
            };
        }
    }
    Ok(cycles)
}

/// Partition the edges of a balanced, strongly connected graph into
/// edge-disjoint directed cycles.
pub fn decompose_balanced(graph: &DirectedGraph) -> Result<Vec<DirectedCycle>, CoverError> {
    if !graph.is_strongly_connected() {
        return Err(CoverError::NotStronglyConnected);
    }
    if !graph.is_balanced() {
        return Err(CoverError::NotBalanced);
    }
    let cycles = peel_cycles(graph, &vec![1; graph.edge_count()])?;
    Ok(cycles
        .into_iter()
        .map(|edges| DirectedCycle { edges })
        .collect())
}

/// Cover minimizing `Σ Tᵢ`: a minimum circulation with unit lower bounds and
/// unit costs, decomposed into simple cycles.
pub fn minimal_cover(graph: &DirectedGraph) -> Result<CycleCover, CoverError> {
    if !graph.is_strongly_connected() {
        return Err(CoverError::NotStronglyConnected);
    }
    let m = graph.edge_count();
    let flow = min_circulation(graph, &vec![1; m], &vec![1; m])
        .ok_or(CoverError::NotStronglyConnected)?;
    let counts: Vec<usize> = flow.iter().map(|&f| f as usize).collect();
    let cycles = peel_cycles(graph, &counts)?
        .into_iter()
        .map(|edges| DirectedCycle { edges })
        .collect();
    let cover = CycleCover::from_cycles(graph, cycles);
    debug_assert_eq!(cover.multiplicity, counts);
    Ok(cover)
}

/// All simple directed cycles, each listed once starting from its lowest
/// vertex, up to `limit` cycles. Parallel edges yield distinct cycles.
pub fn simple_cycles(graph: &DirectedGraph, limit: usize) -> Vec<DirectedCycle> {
    let out = graph.out_edges();
    let n = graph.vertex_count();
    let mut found = Vec::new();
    let mut visited = vec![false; n];
    let mut path = Vec::new();

    fn dfs(
        graph: &DirectedGraph,
        out: &[Vec<usize>],
        start: usize,
        v: usize,
        visited: &mut [bool],
        path: &mut Vec<usize>,
        found: &mut Vec<DirectedCycle>,
        limit: usize,
    ) {
        for &e in &out[v] {
            if found.len() >= limit {
                return;
            }
            let w = graph.edge(e).head;
            if w == start {
                path.push(e);
                found.push(DirectedCycle { edges: path.clone() });
                path.pop();
            } else if w > start && !visited[w] {
                visited[w] = true;
                path.push(e);
                dfs(graph, out, start, w, visited, path, found, limit);
                path.pop();
                visited[w] = false;
            }
        }
    }

    for start in 0..n {
        visited[start] = true;
        dfs(graph, &out, start, start, &mut visited, &mut path, &mut found, limit);
        visited[start] = false;
        if found.len() >= limit {
            break;
        }
    }
    found
}

/// The minimal cover followed by up to `limit - 1` alternative covers with
/// the same total multiplicity, in a deterministic order.
pub fn enumerate_minimal_covers(graph: &DirectedGraph, limit: usize) -> Result<Vec<CycleCover>, CoverError> {
    let first = minimal_cover(graph)?;
    let target = first.total_multiplicity();
    let mut covers = vec![first];
    if limit <= 1 {
        return Ok(covers);
    }
    let mut seen = BTreeSet::new();
    seen.insert(covers[0].canonical_key());

    let cycles = simple_cycles(graph, 256);
    let m = graph.edge_count();
    let mut chosen: Vec<usize> = Vec::new();
    let mut covered = vec![0usize; m];

    #[allow(clippy::too_many_arguments)]
    fn search(
        graph: &DirectedGraph,
        cycles: &[DirectedCycle],
        target: usize,
        cost: usize,
        chosen: &mut Vec<usize>,
        covered: &mut [usize],
        seen: &mut BTreeSet<Vec<Vec<usize>>>,
        covers: &mut Vec<CycleCover>,
        limit: usize,
    ) {
        if covers.len() >= limit {
            return;
        }
        let Some(edge) = covered.iter().position(|&c| c == 0) else {
            if cost == target {
                let cover = CycleCover::from_cycles(
                    graph,
                    chosen.iter().map(|&j| cycles[j].clone()).collect(),
                );
                if seen.insert(cover.canonical_key()) {
                    covers.push(cover);
                }
            }
            return;
        };
        for (j, c) in cycles.iter().enumerate() {
            if !c.contains(edge) || cost + c.len() > target || chosen.contains(&j) {
                continue;
            }
            chosen.push(j);
            for &e in c.edges() {
                covered[e] += 1;
            }
            search(graph, cycles, target, cost + c.len(), chosen, covered, seen, covers, limit);
            for &e in c.edges() {
                covered[e] -= 1;
            }
            chosen.pop();
            if covers.len() >= limit {
                return;
            }
        }
    }

    search(graph, &cycles, target, 0, &mut chosen, &mut covered, &mut seen, &mut covers, limit);
    Ok(covers)
}

/// `Tᵢ − 1` equally spaced points strictly inside each edge interval.
pub fn default_breakpoints(net: &ConstrainedNetwork, cover: &CycleCover) -> Vec<Vec<f64>> {
    net.constraints
        .iter()
        .zip(&cover.multiplicity)
        .map(|(c, &t)| {
            (1..t.max(1))
                .map(|k| c.lo() + c.width() * k as f64 / t as f64)
                .collect()
        })
        .collect()
}

/// Network split according to a cover, with the induced edge-disjoint cover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedNetwork {
    pub network: ConstrainedNetwork,
    pub mapping: EdgeMapping,
    pub cover: CycleCover,
}

/// Split every edge `i` into `Tᵢ` copies; the `r`-th cycle through edge `i`
/// (by cycle index) receives copy `r`.
pub fn augment(
    net: &ConstrainedNetwork,
    cover: &CycleCover,
    breakpoints: &[Vec<f64>],
) -> Result<AugmentedNetwork, CoverError> {
    let identity: Vec<Vec<usize>> = cover.multiplicity.iter().map(|&t| (0..t).collect()).collect();
    augment_with_assignment(net, cover, breakpoints, &identity)
}

/// As [`augment`], with `assignment[i][r]` naming the copy of edge `i` used
/// by the `r`-th cycle through it.
pub fn augment_with_assignment(
    net: &ConstrainedNetwork,
    cover: &CycleCover,
    breakpoints: &[Vec<f64>],
    assignment: &[Vec<usize>],
) -> Result<AugmentedNetwork, CoverError> {
    let m = net.edge_count();
    if let Some(edge) = cover.multiplicity.iter().position(|&t| t == 0) {
        return Err(CoverError::Uncovered(edge));
    }
    if breakpoints.len() != m {
        return Err(ConstraintError::LengthMismatch { expected: m, got: breakpoints.len() }.into());
    }
    for (edge, (bps, &t)) in breakpoints.iter().zip(&cover.multiplicity).enumerate() {
        if bps.len() + 1 != t {
            return Err(CoverError::BreakpointArity { edge, expected: t - 1, got: bps.len() });
        }
        let mut sorted = assignment[edge].clone();
        sorted.sort_unstable();
        if sorted != (0..t).collect::<Vec<_>>() {
            return Err(CoverError::BadAssignment { edge, copies: t, assignment: assignment[edge].clone() });
        }
    }
    let (network, mapping) = split_edges(net, breakpoints)?;

    let mut rank = vec![0usize; m];
    let cycles = cover
        .cycles
        .iter()
        .map(|c| {
            let edges = c
                .edges()
                .iter()
                .map(|&e| {
                    let copy = assignment[e][rank[e]];
                    rank[e] += 1;
                    mapping.images[e][copy].target
                })
                .collect();
            DirectedCycle::new(&network.graph, edges)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let cover = CycleCover::from_cycles(&network.graph, cycles);
    debug_assert!(cover.is_partition());
    Ok(AugmentedNetwork { network, mapping, cover })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shared_edge() -> DirectedGraph {
        DirectedGraph::new(4, [(0, 1), (1, 2), (2, 0), (0, 3), (3, 2)]).unwrap()
    }

    fn sets(cycles: &[DirectedCycle]) -> Vec<Vec<usize>> {
        let mut s: Vec<_> = cycles.iter().map(DirectedCycle::edge_set).collect();
        s.sort();
        s
    }

    #[test]
    fn cycle_validation() {
        let g = shared_edge();
        assert!(DirectedCycle::new(&g, vec![0, 1, 2]).is_ok());
        assert!(DirectedCycle::new(&g, vec![2, 3, 4]).is_ok());
        assert!(DirectedCycle::new(&g, vec![0, 2, 1]).is_err());
        assert!(DirectedCycle::new(&g, vec![0, 1]).is_err());
        assert!(DirectedCycle::new(&g, vec![]).is_err());
    }

    #[test]
    fn decompose_examples() {
        let tri = DirectedGraph::cycle(3).unwrap();
        assert_eq!(sets(&decompose_balanced(&tri).unwrap()), vec![vec![0, 1, 2]]);

        let two = DirectedGraph::new(2, [(0, 1), (1, 0)]).unwrap();
        assert_eq!(decompose_balanced(&two).unwrap().len(), 1);

        // augmented shared-edge graph: e1, e2, e3₁, e3₂, e4, e5
        let aug = DirectedGraph::new(4, [(0, 1), (1, 2), (2, 0), (2, 0), (0, 3), (3, 2)]).unwrap();
        assert_eq!(
            sets(&decompose_balanced(&aug).unwrap()),
            vec![vec![0, 1, 2], vec![3, 4, 5]]
        );

        assert_eq!(decompose_balanced(&shared_edge()), Err(CoverError::NotBalanced));
        let pair = DirectedGraph::new(4, [(0, 1), (1, 0), (2, 3), (3, 2)]).unwrap();
        assert_eq!(decompose_balanced(&pair), Err(CoverError::NotStronglyConnected));
    }

    #[test]
    fn decomposition_peels_nested_loops() {
        // figure-eight through vertex 0 plus a loop hanging off vertex 2
        let g = DirectedGraph::new(
            4,
            [(0, 1), (1, 2), (2, 0), (0, 2), (2, 3), (3, 0)],
        )
        .unwrap();
        let cycles = decompose_balanced(&g).unwrap();
        let total: usize = cycles.iter().map(DirectedCycle::len).sum();
        assert_eq!(total, g.edge_count());
        let cover = CycleCover::from_cycles(&g, cycles);
        assert!(cover.is_partition());
    }

    #[test]
    fn minimal_cover_examples() {
        let tri = DirectedGraph::cycle(3).unwrap();
        let c = minimal_cover(&tri).unwrap();
        assert_eq!(c.multiplicity, vec![1, 1, 1]);
        assert_eq!(c.cycles.len(), 1);

        let c = minimal_cover(&shared_edge()).unwrap();
        assert_eq!(c.multiplicity, vec![1, 1, 2, 1, 1]);
        assert_eq!(sets(&c.cycles), vec![vec![0, 1, 2], vec![2, 3, 4]]);
        assert_eq!(c.cycles[0].edges(), &[0, 1, 2]);

        let path = DirectedGraph::new(3, [(0, 1), (1, 2)]).unwrap();
        assert_eq!(minimal_cover(&path), Err(CoverError::NotStronglyConnected));
    }

    #[test]
    fn simple_cycle_enumeration() {
        assert_eq!(simple_cycles(&shared_edge(), 100).len(), 2);
        let k3: Vec<_> = (0..3).flat_map(|a| (0..3).filter(move |&b| b != a).map(move |b| (a, b))).collect();
        let g = DirectedGraph::new(3, k3).unwrap();
        // three 2-cycles and two 3-cycles
        assert_eq!(simple_cycles(&g, 100).len(), 5);
        assert_eq!(simple_cycles(&g, 2).len(), 2);
    }

    #[test]
    fn alternative_covers() {
        let k3: Vec<_> = (0..3).flat_map(|a| (0..3).filter(move |&b| b != a).map(move |b| (a, b))).collect();
        let g = DirectedGraph::new(3, k3).unwrap();
        let covers = enumerate_minimal_covers(&g, 10).unwrap();
        assert!(covers.len() >= 2);
        let total = covers[0].total_multiplicity();
        assert_eq!(total, 6);
        for c in &covers {
            assert!(c.covers_all_edges());
            assert_eq!(c.total_multiplicity(), total);
        }
        let keys: BTreeSet<_> = covers.iter().map(CycleCover::canonical_key).collect();
        assert_eq!(keys.len(), covers.len());
    }

    #[test]
    fn augment_shared_edge_graph() {
        let net = ConstrainedNetwork::from_records(
            4,
            &[(0, 1, 0.3, 1.0), (1, 2, 0.3, 1.0), (2, 0, 0.3, 1.6), (0, 3, 0.3, 1.0), (3, 2, 0.3, 1.0)],
        )
        .unwrap();
        let cover = minimal_cover(&net.graph).unwrap();
        let mut bps = vec![Vec::new(); 5];
        bps[2] = vec![0.8];
        let aug = augment(&net, &cover, &bps).unwrap();
        assert_eq!(aug.network.edge_count(), 6);
        assert!(aug.network.graph.is_balanced());
        assert!(aug.network.graph.is_strongly_connected());
        assert_eq!(aug.network.constraints[2].lo(), 0.3);
        assert_eq!(aug.network.constraints[2].hi(), 0.8);
        assert_eq!(aug.network.constraints[3].lo(), 0.0);
        assert!((aug.network.constraints[3].hi() - 0.8).abs() < 1e-15);
        assert_eq!(aug.cover.cycles[0].edges(), &[0, 1, 2]);
        assert_eq!(aug.cover.cycles[1].edges(), &[3, 4, 5]);
        assert!(decompose_balanced(&aug.network.graph).is_ok());

        let swapped = augment_with_assignment(
            &net,
            &cover,
            &bps,
            &[vec![0], vec![0], vec![1, 0], vec![0], vec![0]],
        )
        .unwrap();
        assert_eq!(swapped.cover.cycles[0].edges(), &[0, 1, 3]);

        assert!(matches!(
            augment(&net, &cover, &vec![Vec::new(); 5]),
            Err(CoverError::BreakpointArity { edge: 2, expected: 1, got: 0 })
        ));
        let mut bad = bps.clone();
        bad[2] = vec![2.0];
        assert!(matches!(augment(&net, &cover, &bad), Err(CoverError::Constraint(_))));
    }

    #[test]
    fn augment_balanced_is_identity() {
        let net = ConstrainedNetwork::from_records(3, &[(0, 1, 1.0, 2.0), (1, 2, 1.0, 2.0), (2, 0, 1.0, 2.0)]).unwrap();
        let cover = minimal_cover(&net.graph).unwrap();
        let aug = augment(&net, &cover, &default_breakpoints(&net, &cover)).unwrap();
        assert_eq!(aug.network, net);
        assert!(aug.mapping.is_identity());
    }

    #[test]
    fn default_breakpoints_are_interior() {
        let net = ConstrainedNetwork::from_records(
            4,
            &[(0, 1, 0.3, 1.0), (1, 2, 0.3, 1.0), (2, 0, 0.5, 0.8), (0, 3, 0.3, 1.0), (3, 2, 0.3, 1.0)],
        )
        .unwrap();
        let cover = minimal_cover(&net.graph).unwrap();
        let bps = default_breakpoints(&net, &cover);
        assert_eq!(bps[2].len(), 1);
        assert!((bps[2][0] - 0.65).abs() < 1e-12);
        assert!(bps.iter().enumerate().all(|(i, b)| i == 2 || b.is_empty()));
    }
}
