//! Integer minimum-cost circulation with per-edge lower bounds, via
//! successive shortest paths on the residual network.

use crate::graph::DirectedGraph;

struct Arc {
    to: usize,
    cap: i64,
    cost: i64,
}

struct FlowNetwork {
    arcs: Vec<Arc>,
    adj: Vec<Vec<usize>>,
}

impl FlowNetwork {
    fn new(nodes: usize) -> Self {
        Self { arcs: Vec::new(), adj: vec![Vec::new(); nodes] }
    }

    /// Returns the id of the forward arc; its reverse is `id ^ 1`.
    fn add_arc(&mut self, from: usize, to: usize, cap: i64, cost: i64) -> usize {
        let id = self.arcs.len();
        self.arcs.push(Arc { to, cap, cost });
        self.adj[from].push(id);
        self.arcs.push(Arc { to: from, cap: 0, cost: -cost });
        self.adj[to].push(id + 1);
        id
    }

    /// Bellman-Ford over the residual graph; returns the predecessor arc of
    /// every reached node.
    fn shortest_path(&self, source: usize) -> Vec<Option<usize>> {
        let n = self.adj.len();
        let mut dist = vec![i64::MAX; n];
        let mut pred = vec![None; n];
        dist[source] = 0;
        for _ in 0..n {
            let mut changed = false;
            for v in 0..n {
                if dist[v] == i64::MAX {
                    continue;
                }
                for &a in &self.adj[v] {
                    let arc = &self.arcs[a];
                    if arc.cap > 0 && dist[v] + arc.cost < dist[arc.to] {
                        dist[arc.to] = dist[v] + arc.cost;
                        pred[arc.to] = Some(a);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        pred
    }

    /// Push up to `demand` units from `source` to `sink`; returns the amount
    /// actually routed.
    fn min_cost_flow(&mut self, source: usize, sink: usize, demand: i64) -> i64 {
        let mut sent = 0;
        while sent < demand {
            let pred = self.shortest_path(source);
            if pred[sink].is_none() {
                break;
            }
            let mut push = demand - sent;
            let mut v = sink;
            while v != source {
                let a = pred[v].unwrap();
                push = push.min(self.arcs[a].cap);
                v = self.arcs[a ^ 1].to;
            }
            let mut v = sink;
            while v != source {
                let a = pred[v].unwrap();
                self.arcs[a].cap -= push;
                self.arcs[a ^ 1].cap += push;
                v = self.arcs[a ^ 1].to;
            }
            sent += push;
        }
        sent
    }
}

/// Minimum-cost integer circulation `f` on `graph` with `f ≥ lower` and
/// nonnegative `cost`, no upper capacities. `None` if infeasible.
pub fn min_circulation(graph: &DirectedGraph, lower: &[i64], cost: &[i64]) -> Option<Vec<i64>> {
    let n = graph.vertex_count();
    let m = graph.edge_count();
    debug_assert_eq!(lower.len(), m);
    debug_assert_eq!(cost.len(), m);

    // f = lower + g with g ≥ 0; the lower bounds leave an imbalance that g
    // must route from surplus vertices to deficit vertices.
    let mut excess = vec![0i64; n];
    for (e, &l) in graph.edges().iter().zip(lower) {
        excess[e.head] += l;
        excess[e.tail] -= l;
    }
    let total: i64 = excess.iter().filter(|&&x| x > 0).sum();
    let source = n;
    let sink = n + 1;
    let mut net = FlowNetwork::new(n + 2);
    let big = total.max(1);
    let arc_ids: Vec<usize> = graph
        .edges()
        .iter()
        .zip(cost)
        .map(|(e, &c)| net.add_arc(e.tail, e.head, big, c))
        .collect();
    for (v, &x) in excess.iter().enumerate() {
        if x > 0 {
            net.add_arc(source, v, x, 0);
        } else if x < 0 {
            net.add_arc(v, sink, -x, 0);
        }
    }
    if net.min_cost_flow(source, sink, total) < total {
        return None;
    }
    Some(
        arc_ids
            .iter()
            .zip(lower)
            .map(|(&a, &l)| l + net.arcs[a ^ 1].cap)
            .collect(),
    )
}
