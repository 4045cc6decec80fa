use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraint::{solve_matching, ConstrainedNetwork, MatchResult};
use crate::cover::DirectedCycle;
use crate::graph::{DirectedGraph, TerminalPattern};

/// Widths below this count as a single point.
pub const EPSILON_INT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CycleClass {
    Consensus,
    Clustering,
    Unstable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleVerdict {
    pub classification: CycleClass,
    /// `[max lo, min hi]` over the cycle's edges; empty when `U < L`.
    pub witness: [f64; 2],
    /// Set when `0 < U − L < EPSILON_INT`, which is read as a single point.
    pub boundary_warning: Option<String>,
}

impl CycleVerdict {
    pub fn width(&self) -> f64 {
        self.witness[1] - self.witness[0]
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CycleError {
    #[error("edges {0:?} do not form a directed cycle")]
    NotACycle(Vec<usize>),
    #[error("edge {edge} has interval [{lo}, {hi}], which needs lo ≥ 0 and hi > 0")]
    IncompatibleOrientation { edge: usize, lo: f64, hi: f64 },
}

/// Interval-intersection verdict for a directed cycle of `net`.
pub fn analyze_cycle(net: &ConstrainedNetwork, edges: &[usize]) -> Result<CycleVerdict, CycleError> {
    if edges.iter().any(|&e| e >= net.edge_count()) {
        return Err(CycleError::NotACycle(edges.to_vec()));
    }
    DirectedCycle::new(&net.graph, edges.to_vec()).map_err(|_| CycleError::NotACycle(edges.to_vec()))?;
    for &edge in edges {
        let c = net.constraints[edge];
        if !c.is_compatible() {
            return Err(CycleError::IncompatibleOrientation { edge, lo: c.lo(), hi: c.hi() });
        }
    }
    let lower = edges.iter().map(|&e| net.constraints[e].lo()).fold(f64::NEG_INFINITY, f64::max);
    let upper = edges.iter().map(|&e| net.constraints[e].hi()).fold(f64::INFINITY, f64::min);
    let width = upper - lower;
    let (classification, boundary_warning) = if width < 0.0 {
        (CycleClass::Unstable, None)
    } else if width < EPSILON_INT {
        let warning = (width > 0.0)
            .then(|| format!("intersection width {width:e} is below {EPSILON_INT:e}; treated as a single point"));
        (CycleClass::Clustering, warning)
    } else {
        (CycleClass::Consensus, None)
    };
    Ok(CycleVerdict { classification, witness: [lower, upper], boundary_warning })
}

/// Whether constant in/outflow `E d̄` can be cancelled by integral action.
///
/// # Panics
/// If `dbar` and `terminals` differ in length.
pub fn check_matching(terminals: &TerminalPattern, dbar: &[f64], graph: &DirectedGraph) -> MatchResult {
    solve_matching(graph, terminals, dbar).expect("one disturbance value per terminal column")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::normalize_orientation;
    use crate::constraint::MatchFailure;
    use crate::graph::Terminal;
    use proptest::prelude::*;

    fn triangle(iv: [(f64, f64); 3]) -> ConstrainedNetwork {
        ConstrainedNetwork::from_records(3, &[(0, 1, iv[0].0, iv[0].1), (1, 2, iv[1].0, iv[1].1), (2, 0, iv[2].0, iv[2].1)])
            .unwrap()
    }

    #[test]
    fn trichotomy_on_the_triangle() {
        let v = analyze_cycle(&triangle([(1.0, 2.0), (2.0, 3.0), (0.0, 3.0)]), &[0, 1, 2]).unwrap();
        assert_eq!(v.classification, CycleClass::Clustering);
        assert_eq!(v.witness, [2.0, 2.0]);
        let v = analyze_cycle(&triangle([(1.0, 2.5), (2.0, 3.0), (0.0, 3.0)]), &[0, 1, 2]).unwrap();
        assert_eq!(v.classification, CycleClass::Consensus);
        assert_eq!(v.witness, [2.0, 2.5]);
        let v = analyze_cycle(&triangle([(1.0, 1.5), (2.0, 3.0), (0.0, 3.0)]), &[0, 1, 2]).unwrap();
        assert_eq!(v.classification, CycleClass::Unstable);
        assert!(v.width() < 0.0);
    }

    #[test]
    fn narrow_intersection_warns() {
        let v = analyze_cycle(&triangle([(1.0, 2.0 + 1e-12), (2.0, 3.0), (0.0, 3.0)]), &[0, 1, 2]).unwrap();
        assert_eq!(v.classification, CycleClass::Clustering);
        assert!(v.boundary_warning.is_some());
    }

    #[test]
    fn rejects_bad_input() {
        let net = triangle([(1.0, 2.0), (2.0, 3.0), (0.0, 3.0)]);
        assert!(matches!(analyze_cycle(&net, &[0, 1]), Err(CycleError::NotACycle(_))));
        assert!(matches!(analyze_cycle(&net, &[0, 1, 7]), Err(CycleError::NotACycle(_))));
        let net = triangle([(-1.0, 2.0), (2.0, 3.0), (0.0, 3.0)]);
        assert!(matches!(
            analyze_cycle(&net, &[0, 1, 2]),
            Err(CycleError::IncompatibleOrientation { edge: 0, .. })
        ));
    }

    #[test]
    fn matching_cases() {
        let g = DirectedGraph::new(3, [(0, 1), (1, 2), (2, 0)]).unwrap();
        let r = check_matching(&TerminalPattern::empty(), &[], &g);
        assert!(r.is_matchable());
        let tp = TerminalPattern::new(3, vec![Terminal { vertex: 0, sign: 1 }, Terminal { vertex: 1, sign: -1 }]).unwrap();
        let r = check_matching(&tp, &[1.0, 1.0], &g);
        assert!(r.is_matchable());
        assert!(r.xbar_c.unwrap().iter().all(|v| v.is_finite()));
        let r = check_matching(&tp, &[1.0, 0.5], &g);
        assert_eq!(r.failure, Some(MatchFailure::Imbalanced));
        let r = check_matching(&tp, &[0.0, 0.0], &g);
        assert_eq!(r.xbar_c, Some(vec![0.0; 3]));
    }

    proptest! {
        #[test]
        fn verdict_is_invariant_under_common_shift(
            lo in proptest::collection::vec(0.0f64..3.0, 4),
            w in proptest::collection::vec(0.1f64..3.0, 4),
            shift in 0.0f64..5.0,
            flip in any::<bool>(),
        ) {
            let rec = |s: f64| -> Vec<(usize, usize, f64, f64)> {
                (0..4).map(|k| (k, (k + 1) % 4, lo[k] + s, lo[k] + w[k] + s)).collect()
            };
            let base = ConstrainedNetwork::from_records(4, &rec(0.0)).unwrap();
            let expected = analyze_cycle(&base, &[0, 1, 2, 3]).unwrap().classification;
            // shift up, or far enough down that every interval is negative
            let s = if flip { -(lo.iter().zip(&w).map(|(a, b)| a + b).fold(0.0, f64::max) + shift) } else { shift };
            let shifted = ConstrainedNetwork::from_records(4, &rec(s)).unwrap();
            let (normalized, _) = normalize_orientation(&shifted);
            prop_assume!(normalized.graph.is_single_cycle());
            let cycle: Vec<usize> = if flip { vec![3, 2, 1, 0] } else { vec![0, 1, 2, 3] };
            let got = analyze_cycle(&normalized, &cycle).unwrap().classification;
            prop_assert_eq!(got, expected);
        }
    }
}
