use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::certificate::{certify_consensus, CertificateOptions, CertificateOutcome, ConsensusCertificate, InconclusiveReason};
use super::cycle::{analyze_cycle, check_matching, CycleClass, CycleVerdict};
use crate::constraint::{normalize_orientation, ConstrainedNetwork, ConstraintError, EdgeMapping, MatchFailure, MatchResult};
use crate::cover::DirectedCycle;
use crate::dynamics::{Control, NetworkSystem};
use crate::graph::DirectedGraph;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Epistemic {
    /// Necessary and sufficient for the network at hand.
    Exact,
    /// A sufficient condition held; its failure would not imply the opposite.
    Sufficient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status")]
pub enum Verdict {
    Consensus {
        epistemic: Epistemic,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        cycle: Option<CycleVerdict>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        certificate: Option<ConsensusCertificate>,
    },
    /// Consensus within each weakly connected component (integral action
    /// without flow bounds).
    ComponentConsensus { epistemic: Epistemic, components: Vec<Vec<usize>> },
    Clustering { epistemic: Epistemic, cycle: CycleVerdict },
    Unstable { epistemic: Epistemic, reason: String },
    /// Not strongly connected and no flow is pinned away from zero between
    /// components: storage may settle, but not generally at consensus.
    EquilibriumWithoutConsensusPossible { components: Vec<Vec<usize>> },
    Inconclusive { reason: InconclusiveReason },
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Consensus { .. } => "Consensus",
            Verdict::ComponentConsensus { .. } => "ComponentConsensus",
            Verdict::Clustering { .. } => "Clustering",
            Verdict::Unstable { .. } => "Unstable",
            Verdict::EquilibriumWithoutConsensusPossible { .. } => "EquilibriumWithoutConsensusPossible",
            Verdict::Inconclusive { .. } => "Inconclusive",
        }
    }

    pub fn is_inconclusive(&self) -> bool {
        matches!(self, Verdict::Inconclusive { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Connectivity {
    pub weak_components: usize,
    pub strongly_connected: bool,
    pub strong_components: Vec<Vec<usize>>,
    pub balanced: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticReport {
    pub schema_version: u32,
    pub mode: String,
    pub vertices: usize,
    pub edges: usize,
    pub matching: MatchResult,
    /// Intervals after folding in the in/outflow, before reorientation.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub absorbed: Option<ConstrainedNetwork>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub normalized: Option<ConstrainedNetwork>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub normalization: Option<EdgeMapping>,
    pub connectivity: Connectivity,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

impl StaticReport {
    /// 0 for a definite verdict, 2 when inconclusive.
    pub fn exit_code(&self) -> i32 {
        if self.verdict.is_inconclusive() { 2 } else { 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("in/outflow cannot be matched: {0}")]
    NoMatching(MatchFailure),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
}

fn groups((count, labels): (usize, Vec<usize>)) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); count];
    for (v, &k) in labels.iter().enumerate() {
        out[k].push(v);
    }
    out.sort();
    out
}

fn connectivity(graph: &DirectedGraph) -> Connectivity {
    Connectivity {
        weak_components: graph.weak_components().0,
        strongly_connected: graph.is_strongly_connected(),
        strong_components: groups(graph.strong_components()),
        balanced: graph.is_balanced(),
    }
}

/// Verdict for a compatibly oriented network.
pub fn classify_network(net: &ConstrainedNetwork, options: &CertificateOptions, notes: &mut Vec<String>) -> Verdict {
    let g = &net.graph;
    if g.edge_count() == 0 && g.vertex_count() == 1 {
        return Verdict::Consensus { epistemic: Epistemic::Exact, cycle: None, certificate: None };
    }
    if !g.is_strongly_connected() {
        let (_, component_of) = g.strong_components();
        // the upstream closure of a pinned edge's tail only ever loses storage
        let pinned = g.edges().iter().zip(&net.constraints).position(|(e, c)| {
            component_of[e.tail] != component_of[e.head] && c.lo() > 0.0
        });
        if let Some(edge) = pinned {
            let e = g.edge(edge);
            return Verdict::Unstable {
                epistemic: Epistemic::Exact,
                reason: format!(
                    "edge {edge} ({} -> {}) joins two strongly connected components with flow pinned at least {}",
                    e.tail,
                    e.head,
                    net.constraints[edge].lo()
                ),
            };
        }
        return Verdict::EquilibriumWithoutConsensusPossible { components: groups(g.strong_components()) };
    }
    if g.is_single_cycle() {
        let start = 0;
        let mut order = vec![start];
        let out = g.out_edges();
        while order.len() < g.edge_count() {
            let head = g.edge(*order.last().unwrap()).head;
            order.push(out[head][0]);
        }
        let cycle = DirectedCycle::new(g, order).expect("single-cycle graph walks as a cycle");
        let verdict = analyze_cycle(net, cycle.edges()).expect("normalized single cycle");
        if let Some(w) = &verdict.boundary_warning {
            notes.push(w.clone());
        }
        return match verdict.classification {
            CycleClass::Consensus => Verdict::Consensus { epistemic: Epistemic::Exact, cycle: Some(verdict), certificate: None },
            CycleClass::Clustering => Verdict::Clustering { epistemic: Epistemic::Exact, cycle: verdict },
            CycleClass::Unstable => Verdict::Unstable {
                epistemic: Epistemic::Exact,
                reason: format!(
                    "cycle intervals do not intersect (max lower {} > min upper {})",
                    verdict.witness[0], verdict.witness[1]
                ),
            },
        };
    }
    notes.push(format!(
        "general graph: consensus is certified by splitting shared edges (sufficient only); \
         up to {} minimal covers and {} assignments per cover were examined",
        options.cover_limit, options.assignment_limit
    ));
    match certify_consensus(net, options) {
        CertificateOutcome::Certified(cert) => {
            Verdict::Consensus { epistemic: Epistemic::Sufficient, cycle: None, certificate: Some(cert) }
        }
        CertificateOutcome::Inconclusive(reason) => Verdict::Inconclusive { reason },
    }
}

/// Static analysis of a closed loop: absorb the in/outflow, reorient the
/// edges, then decide from connectivity, the cycle intersection or a
/// consensus certificate.
pub fn analyze_network(system: &NetworkSystem, options: &CertificateOptions) -> Result<StaticReport, AnalysisError> {
    let matching = check_matching(&system.terminals, &system.disturbance, &system.graph);
    if let Some(f) = matching.failure {
        return Err(AnalysisError::NoMatching(f));
    }
    let xbar = matching.xbar_c.clone().unwrap_or_default();
    let mut notes = Vec::new();
    match &system.control {
        Control::Unconstrained { .. } => {
            let components = groups(system.graph.weak_components());
            Ok(StaticReport {
                schema_version: REPORT_SCHEMA_VERSION,
                mode: "unconstrained".into(),
                vertices: system.vertex_count(),
                edges: system.edge_count(),
                connectivity: connectivity(&system.graph),
                matching,
                absorbed: None,
                normalized: None,
                normalization: None,
                verdict: Verdict::ComponentConsensus { epistemic: Epistemic::Exact, components },
                notes,
            })
        }
        Control::Saturated { constraints } => {
            let shifted = constraints
                .iter()
                .zip(&xbar)
                .map(|(c, &s)| c.shifted(s))
                .collect::<Result<Vec<_>, _>>()?;
            let absorbed = ConstrainedNetwork::new(system.graph.clone(), shifted)?;
            let (normalized, mapping) = normalize_orientation(&absorbed);
            if !mapping.is_identity() {
                notes.push("edge orientation changed to make every interval compatible".into());
            }
            let verdict = classify_network(&normalized, options, &mut notes);
            Ok(StaticReport {
                schema_version: REPORT_SCHEMA_VERSION,
                mode: "saturated".into(),
                vertices: system.vertex_count(),
                edges: system.edge_count(),
                connectivity: connectivity(&normalized.graph),
                matching,
                absorbed: Some(absorbed),
                normalized: Some(normalized),
                normalization: Some(mapping),
                verdict,
                notes,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(n: usize, rec: &[(usize, usize, f64, f64)]) -> StaticReport {
        let net = ConstrainedNetwork::from_records(n, rec).unwrap();
        analyze_network(&NetworkSystem::saturated_identity(net), &CertificateOptions::default()).unwrap()
    }

    #[test]
    fn single_edge_cases() {
        let r = report(2, &[(0, 1, 0.0, 1.0)]);
        assert_eq!(r.verdict.label(), "EquilibriumWithoutConsensusPossible");
        assert_eq!(r.exit_code(), 0);
        let r = report(2, &[(0, 1, 1.0, 2.0)]);
        assert!(matches!(r.verdict, Verdict::Unstable { epistemic: Epistemic::Exact, .. }));
        // reversed edge [−2, −1] is the same pinned flow the other way
        let r = report(2, &[(0, 1, -2.0, -1.0)]);
        assert_eq!(r.verdict.label(), "Unstable");
        assert!(!r.normalization.as_ref().unwrap().is_identity());
    }

    #[test]
    fn triangle_trichotomy() {
        let tri = |a: f64, b: f64| report(3, &[(0, 1, a, b), (1, 2, 2.0, 3.0), (2, 0, 0.0, 3.0)]);
        assert_eq!(tri(1.0, 2.0).verdict.label(), "Clustering");
        assert_eq!(tri(1.0, 2.5).verdict.label(), "Consensus");
        assert_eq!(tri(1.0, 1.5).verdict.label(), "Unstable");
    }

    #[test]
    fn general_graph_goes_through_certificate() {
        let ends = [(0, 1), (1, 2), (2, 0), (0, 3), (3, 2)];
        let mk = |e3: (f64, f64)| -> Vec<(usize, usize, f64, f64)> {
            ends.iter()
                .enumerate()
                .map(|(k, &(t, h))| if k == 2 { (t, h, e3.0, e3.1) } else { (t, h, 0.3, 1.0) })
                .collect()
        };
        let r = report(4, &mk((0.5, 0.8)));
        assert_eq!(r.exit_code(), 2);
        let r = report(4, &mk((0.3, 1.6)));
        match &r.verdict {
            Verdict::Consensus { epistemic: Epistemic::Sufficient, certificate: Some(c), .. } => {
                c.verify(r.normalized.as_ref().unwrap()).unwrap()
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn report_serializes_with_schema_version() {
        let r = report(3, &[(0, 1, 1.0, 2.5), (1, 2, 2.0, 3.0), (2, 0, 0.0, 3.0)]);
        let doc = serde_json::to_value(&r).unwrap();
        assert_eq!(doc["schema_version"], 1);
        assert_eq!(doc["verdict"]["status"], "Consensus");
        let back: StaticReport = serde_json::from_value(doc).unwrap();
        assert_eq!(back, r);
    }
}
