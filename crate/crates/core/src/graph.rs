//! Directed multigraphs, their incidence matrices and the connectivity
//! predicates used throughout the crate.
//!
//! Vertices are dense `0..n` ids. Edges keep their insertion order, so edge
//! `j` is always column `j` of the incidence matrix. Parallel edges are
//! allowed; self-loops are not.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("graph must have at least one vertex")]
    NoVertices,
    #[error("edge {edge}: vertex {vertex} out of range for {n} vertices")]
    VertexOutOfRange { edge: usize, vertex: usize, n: usize },
    #[error("edge {edge}: self-loop at vertex {vertex}")]
    SelfLoop { edge: usize, vertex: usize },
    #[error("terminal {index}: vertex {vertex} out of range for {n} vertices")]
    TerminalOutOfRange { index: usize, vertex: usize, n: usize },
    #[error("terminal {index}: sign must be +1 or -1, got {sign}")]
    TerminalSign { index: usize, sign: i8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
}

impl Edge {
    pub fn new(tail: usize, head: usize) -> Self {
        Self { tail, head }
    }

    pub fn reversed(self) -> Self {
        Self { tail: self.head, head: self.tail }
    }
}

/// Directed graph with a stable edge order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawGraph", into = "RawGraph")]
pub struct DirectedGraph {
    n: usize,
    edges: Vec<Edge>,
}

#[derive(Serialize, Deserialize)]
struct RawGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl TryFrom<RawGraph> for DirectedGraph {
    type Error = GraphError;

    fn try_from(raw: RawGraph) -> Result<Self, Self::Error> {
        DirectedGraph::new(raw.n, raw.edges)
    }
}

impl From<DirectedGraph> for RawGraph {
    fn from(g: DirectedGraph) -> Self {
        RawGraph {
            n: g.n,
            edges: g.edges.iter().map(|e| (e.tail, e.head)).collect(),
        }
    }
}

impl DirectedGraph {
    pub fn new<I>(n: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if n == 0 {
            return Err(GraphError::NoVertices);
        }
        let mut out = Vec::new();
        for (idx, (tail, head)) in edges.into_iter().enumerate() {
            for v in [tail, head] {
                if v >= n {
                    return Err(GraphError::VertexOutOfRange { edge: idx, vertex: v, n });
                }
            }
            if tail == head {
                return Err(GraphError::SelfLoop { edge: idx, vertex: tail });
            }
            out.push(Edge { tail, head });
        }
        Ok(Self { n, edges: out })
    }

    /// Directed cycle `0 → 1 → … → n-1 → 0`.
    pub fn cycle(n: usize) -> Result<Self, GraphError> {
        Self::new(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> Edge {
        self.edges[id]
    }

    pub fn incidence(&self) -> IncidenceMatrix {
        let m = self.edges.len();
        let mut entries = vec![0i8; self.n * m];
        for (j, e) in self.edges.iter().enumerate() {
            entries[e.tail * m + j] = -1;
            entries[e.head * m + j] = 1;
        }
        IncidenceMatrix { rows: self.n, cols: m, entries }
    }

    /// `B · u` without materializing `B`.
    pub fn apply_incidence(&self, edge_values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.apply_incidence_into(edge_values, &mut out);
        out
    }

    pub fn apply_incidence_into(&self, edge_values: &[f64], out: &mut [f64]) {
        debug_assert_eq!(edge_values.len(), self.edges.len());
        out.iter_mut().for_each(|o| *o = 0.0);
        for (e, &u) in self.edges.iter().zip(edge_values) {
            out[e.tail] -= u;
            out[e.head] += u;
        }
    }

    /// `Bᵀ · p`: for each edge, head value minus tail value.
    pub fn apply_incidence_transpose(&self, vertex_values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.edges.len()];
        self.apply_incidence_transpose_into(vertex_values, &mut out);
        out
    }

    pub fn apply_incidence_transpose_into(&self, vertex_values: &[f64], out: &mut [f64]) {
        debug_assert_eq!(vertex_values.len(), self.n);
        for (o, e) in out.iter_mut().zip(&self.edges) {
            *o = vertex_values[e.head] - vertex_values[e.tail];
        }
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for e in &self.edges {
            d[e.tail] += 1;
        }
        d
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for e in &self.edges {
            d[e.head] += 1;
        }
        d
    }

    /// Outgoing edge ids per vertex, ascending.
    pub fn out_edges(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for (j, e) in self.edges.iter().enumerate() {
            adj[e.tail].push(j);
        }
        adj
    }

    /// Undirected component label per vertex, labels numbered by first
    /// appearance.
    pub fn weak_components(&self) -> (usize, Vec<usize>) {
        let mut adj = vec![Vec::new(); self.n];
        for e in &self.edges {
            adj[e.tail].push(e.head);
            adj[e.head].push(e.tail);
        }
        let mut label = vec![usize::MAX; self.n];
        let mut count = 0;
        let mut stack = Vec::new();
        for s in 0..self.n {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = count;
            stack.push(s);
            while let Some(v) = stack.pop() {
                for &w in &adj[v] {
                    if label[w] == usize::MAX {
                        label[w] = count;
                        stack.push(w);
                    }
                }
            }
            count += 1;
        }
        (count, label)
    }

    /// Returns `(connected, component_count)`.
    pub fn is_weakly_connected(&self) -> (bool, usize) {
        let (count, _) = self.weak_components();
        (count == 1, count)
    }

    /// Strongly connected components (Tarjan, iterative). Component ids are
    /// assigned in reverse topological order of the condensation.
    pub fn strong_components(&self) -> (usize, Vec<usize>) {
        const UNVISITED: usize = usize::MAX;
        let adj = self.out_edges();
        let n = self.n;
        let mut index = vec![UNVISITED; n];
        let mut low = vec![0; n];
        let mut on_stack = vec![false; n];
        let mut comp = vec![UNVISITED; n];
        let mut stack = Vec::new();
        let mut next_index = 0;
        let mut count = 0;
        // (vertex, position in its adjacency list)
        let mut call: Vec<(usize, usize)> = Vec::new();

        for root in 0..n {
            if index[root] != UNVISITED {
                continue;
            }
            call.push((root, 0));
            index[root] = next_index;
            low[root] = next_index;
            next_index += 1;
            stack.push(root);
            on_stack[root] = true;

            while let Some(&mut (v, ref mut pos)) = call.last_mut() {
                if *pos < adj[v].len() {
                    let w = self.edges[adj[v][*pos]].head;
                    *pos += 1;
                    if index[w] == UNVISITED {
                        index[w] = next_index;
                        low[w] = next_index;
                        next_index += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        call.push((w, 0));
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                } else {
                    call.pop();
                    if let Some(&(parent, _)) = call.last() {
                        low[parent] = low[parent].min(low[v]);
                    }
                    if low[v] == index[v] {
                        loop {
                            let w = stack.pop().expect("tarjan stack underflow");
                            on_stack[w] = false;
                            comp[w] = count;
                            if w == v {
                                break;
                            }
                        }
                        count += 1;
                    }
                }
            }
        }
        (count, comp)
    }

    pub fn is_strongly_connected(&self) -> bool {
        self.strong_components().0 == 1
    }

    /// In-degree equals out-degree everywhere, i.e. `B·𝟙 = 0`.
    pub fn is_balanced(&self) -> bool {
        let mut net = vec![0i64; self.n];
        for e in &self.edges {
            net[e.tail] -= 1;
            net[e.head] += 1;
        }
        net.iter().all(|&d| d == 0)
    }

    /// A single simple directed cycle through every vertex.
    pub fn is_single_cycle(&self) -> bool {
        self.n >= 2
            && self.edges.len() == self.n
            && self.out_degrees().iter().all(|&d| d == 1)
            && self.in_degrees().iter().all(|&d| d == 1)
            && self.is_strongly_connected()
    }
}

/// Dense `n × m` incidence matrix over `{-1, 0, 1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<i8>,
}

impl IncidenceMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> i8 {
        self.entries[row * self.cols + col]
    }

    pub fn column(&self, col: usize) -> Vec<i8> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    pub fn column_sums(&self) -> Vec<i64> {
        (0..self.cols)
            .map(|c| (0..self.rows).map(|r| self.get(r, c) as i64).sum())
            .collect()
    }

    pub fn row_sums(&self) -> Vec<i64> {
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self.get(r, c) as i64).sum())
            .collect()
    }

    pub fn to_f64_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self.get(r, c) as f64).collect())
            .collect()
    }
}

/// Terminal vertices where constant external flow enters (`+1`) or leaves
/// (`-1`); column `k` of `E`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Terminal {
    pub vertex: usize,
    pub sign: i8,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TerminalPattern {
    columns: Vec<Terminal>,
}

impl TerminalPattern {
    pub fn new(n: usize, columns: Vec<Terminal>) -> Result<Self, GraphError> {
        for (index, t) in columns.iter().enumerate() {
            if t.vertex >= n {
                return Err(GraphError::TerminalOutOfRange { index, vertex: t.vertex, n });
            }
            if t.sign != 1 && t.sign != -1 {
                return Err(GraphError::TerminalSign { index, sign: t.sign });
            }
        }
        Ok(Self { columns })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn columns(&self) -> &[Terminal] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// `E · d` as a vertex vector of length `n`.
    pub fn apply(&self, n: usize, d: &[f64]) -> Vec<f64> {
        debug_assert_eq!(d.len(), self.columns.len());
        let mut out = vec![0.0; n];
        for (t, &dk) in self.columns.iter().zip(d) {
            out[t.vertex] += t.sign as f64 * dk;
        }
        out
    }
}
