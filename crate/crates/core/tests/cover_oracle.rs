//! Minimal cycle covers against exhaustive search over sets of simple cycles.

use proptest::prelude::*;

use satflow_core::cover::{minimal_cover, DirectedCycle};
use satflow_core::graph::DirectedGraph;

/// Simple cycles as edge-membership masks, by DFS from each cycle's
/// smallest edge id.
fn cycle_masks(n: usize, edges: &[(usize, usize)]) -> Vec<u32> {
    fn walk(edges: &[(usize, usize)], first: usize, at: usize, seen: &mut Vec<bool>, mask: u32, out: &mut Vec<u32>) {
        let start = edges[first].0;
        for (e, &(t, h)) in edges.iter().enumerate() {
            if t != at || e < first || mask >> e & 1 == 1 {
                continue;
            }
            if h == start {
                out.push(mask | 1 << e);
            } else if !seen[h] {
                seen[h] = true;
                walk(edges, first, h, seen, mask | 1 << e, out);
                seen[h] = false;
            }
        }
    }
    let mut out = Vec::new();
    for first in 0..edges.len() {
        let (t, h) = edges[first];
        if t == h {
            out.push(1 << first);
            continue;
        }
        let mut seen = vec![false; n];
        seen[t] = true;
        seen[h] = true;
        walk(edges, first, h, &mut seen, 1 << first, &mut out);
    }
    out.sort_unstable();
    out.dedup();
    out
}

fn brute_minimum(m: usize, cycles: &[u32]) -> Option<usize> {
    let full = (1u32 << m) - 1;
    (0u32..1 << cycles.len())
        .filter_map(|pick| {
            let chosen: Vec<u32> = (0..cycles.len()).filter(|i| pick >> i & 1 == 1).map(|i| cycles[i]).collect();
            let union = chosen.iter().fold(0, |a, c| a | c);
            (union == full).then(|| chosen.iter().map(|c| c.count_ones() as usize).sum())
        })
        .min()
}

fn graph_strategy() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (2usize..=5).prop_flat_map(|n| {
        let ring: Vec<(usize, usize)> = (0..n).map(|v| (v, (v + 1) % n)).collect();
        proptest::collection::vec((0..n, 0..n), 0..=(8 - n)).prop_map(move |extra| {
            let mut edges = ring.clone();
            edges.extend(extra.into_iter().filter(|(a, b)| a != b));
            (n, edges)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn minimal_cover_is_optimal((n, edges) in graph_strategy()) {
        let g = DirectedGraph::new(n, edges.iter().copied()).unwrap();
        let cycles = cycle_masks(n, &edges);
        prop_assume!(cycles.len() <= 14);
        let best = brute_minimum(edges.len(), &cycles).expect("a ring-based graph is strongly connected");
        let cover = minimal_cover(&g).unwrap();
        prop_assert!(cover.covers_all_edges());
        prop_assert_eq!(cover.total_multiplicity(), best);
        prop_assert_eq!(cover.multiplicity.iter().sum::<usize>(), cover.cycles.iter().map(DirectedCycle::len).sum::<usize>());
        for c in &cover.cycles {
            prop_assert!(DirectedCycle::new(&g, c.edges().to_vec()).is_ok());
        }
    }
}
