//! Search for consensus certificates on general strongly connected
//! networks: a cycle cover, breakpoints splitting every multiply covered
//! edge, and a copy assignment under which each cycle of the augmented
//! network has an interval intersection of positive width.
//!
//! For a fixed assignment the lower bound of each copy is a constant (the
//! first copy keeps the edge's lower bound, later copies start at zero), so
//! the widest common margin is a linear program in the copies' upper bounds.
//! Copies after the first are interchangeable, which leaves only the choice
//! of the cycle receiving the first copy of each edge.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cycle::EPSILON_INT;
use super::lp::{maximize, LpOutcome, Row};
use crate::constraint::ConstrainedNetwork;
use crate::cover::{augment_with_assignment, enumerate_minimal_covers, CoverError, CycleCover};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateOptions {
    /// Minimal interior width accepted for every augmented cycle.
    pub epsilon: f64,
    /// Covers examined: the minimal cover and up to `cover_limit − 1`
    /// alternatives of equal total multiplicity.
    pub cover_limit: usize,
    /// Copy assignments examined per cover.
    pub assignment_limit: usize,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        Self { epsilon: EPSILON_INT, cover_limit: 16, assignment_limit: 4096 }
    }
}

/// Intersection of one augmented cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleWitness {
    /// Edge ids in the augmented network.
    pub edges: Vec<usize>,
    pub lower: f64,
    pub upper: f64,
}

impl CycleWitness {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusCertificate {
    pub cover: CycleCover,
    /// Cut points per original edge, strictly increasing inside its interval.
    pub breakpoints: Vec<Vec<f64>>,
    /// `assignment[i][r]`: copy of edge `i` used by the `r`-th cycle that
    /// contains it.
    pub assignment: Vec<Vec<usize>>,
    pub cycles: Vec<CycleWitness>,
    pub epsilon: f64,
}

impl ConsensusCertificate {
    pub fn min_width(&self) -> f64 {
        self.cycles.iter().map(CycleWitness::width).fold(f64::INFINITY, f64::min)
    }

    /// Rebuild the augmented network from `net` and the recorded data and
    /// recheck every claim.
    pub fn verify(&self, net: &ConstrainedNetwork) -> Result<(), String> {
        if !net.is_compatible() {
            return Err("network orientation is not compatible".into());
        }
        let recount = CycleCover::from_cycles(&net.graph, self.cover.cycles.clone());
        if recount.multiplicity != self.cover.multiplicity {
            return Err("recorded multiplicity does not match the cycles".into());
        }
        for cycle in &self.cover.cycles {
            crate::cover::DirectedCycle::new(&net.graph, cycle.edges().to_vec()).map_err(|e| e.to_string())?;
        }
        if !self.cover.covers_all_edges() {
            return Err("cover leaves an edge uncovered".into());
        }
        let aug = augment_with_assignment(net, &self.cover, &self.breakpoints, &self.assignment)
            .map_err(|e| e.to_string())?;
        if aug.cover.cycles.len() != self.cycles.len() || !aug.cover.is_partition() {
            return Err("augmented cycles do not partition the augmented edges".into());
        }
        for (k, (cycle, claim)) in aug.cover.cycles.iter().zip(&self.cycles).enumerate() {
            if cycle.edges() != claim.edges.as_slice() {
                return Err(format!("cycle {k}: recorded edges differ"));
            }
            let lower = cycle.edges().iter().map(|&e| aug.network.constraints[e].lo()).fold(f64::NEG_INFINITY, f64::max);
            let upper = cycle.edges().iter().map(|&e| aug.network.constraints[e].hi()).fold(f64::INFINITY, f64::min);
            if lower != claim.lower || upper != claim.upper {
                return Err(format!("cycle {k}: recorded intersection differs from [{lower}, {upper}]"));
            }
            if upper - lower < self.epsilon {
                return Err(format!("cycle {k}: width {} below {}", upper - lower, self.epsilon));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InconclusiveReason {
    NotStronglyConnected,
    IncompatibleOrientation { edge: usize },
    NoCover { message: String },
    NoFeasibleSplitting {
        covers_tried: usize,
        assignments_tried: usize,
        /// Largest common margin reached by any candidate.
        best_width: f64,
        /// Some assignments were skipped because of the search limit.
        truncated: bool,
    },
}

impl fmt::Display for InconclusiveReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InconclusiveReason::NotStronglyConnected => write!(f, "graph is not strongly connected"),
            InconclusiveReason::IncompatibleOrientation { edge } => {
                write!(f, "edge {edge} is not compatibly oriented")
            }
            InconclusiveReason::NoCover { message } => write!(f, "no cycle cover: {message}"),
            InconclusiveReason::NoFeasibleSplitting { covers_tried, assignments_tried, best_width, truncated } => {
                write!(
                    f,
                    "no splitting gives every cycle a positive-width intersection \
                     ({covers_tried} covers, {assignments_tried} assignments, best width {best_width:e}"
                )?;
                if *truncated {
                    write!(f, ", search truncated")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CertificateOutcome {
    Certified(ConsensusCertificate),
    Inconclusive(InconclusiveReason),
}

impl CertificateOutcome {
    pub fn certificate(&self) -> Option<&ConsensusCertificate> {
        match self {
            CertificateOutcome::Certified(c) => Some(c),
            CertificateOutcome::Inconclusive(_) => None,
        }
    }
}

struct Candidate {
    cover: usize,
    // cycle rank receiving copy 0, per edge
    first_copy: Vec<usize>,
}

fn assignment_for(cover: &CycleCover, first_copy: &[usize]) -> Vec<Vec<usize>> {
    cover
        .multiplicity
        .iter()
        .zip(first_copy)
        .map(|(&t, &r0)| {
            let mut perm = Vec::with_capacity(t);
            let mut next = 1;
            for r in 0..t {
                if r == r0 {
                    perm.push(0);
                } else {
                    perm.push(next);
                    next += 1;
                }
            }
            perm
        })
        .collect()
}

/// Best margin `t` and each copy's upper bound, for one assignment.
fn solve_candidate(net: &ConstrainedNetwork, cover: &CycleCover, first_copy: &[usize]) -> Option<(f64, Vec<Vec<f64>>)> {
    let m = net.edge_count();
    // variable layout: upper bounds of the copies of multi-covered edges, then t
    let mut offset = vec![usize::MAX; m];
    let mut vars = 0;
    for (i, &t) in cover.multiplicity.iter().enumerate() {
        if t > 1 {
            offset[i] = vars;
            vars += t;
        }
    }
    let t_var = vars;
    let width = vars + 1;

    // constant lower bound of each cycle's intersection
    let mut rank = vec![0usize; m];
    let mut members: Vec<Vec<(usize, usize)>> = Vec::with_capacity(cover.cycles.len());
    let mut lower = Vec::with_capacity(cover.cycles.len());
    for cycle in &cover.cycles {
        let mut l = f64::NEG_INFINITY;
        let mut own = Vec::new();
        for &e in cycle.edges() {
            let r = rank[e];
            rank[e] += 1;
            let copy = if r == first_copy[e] { 0 } else if r < first_copy[e] { r + 1 } else { r };
            let copy_lo = if copy == 0 { net.constraints[e].lo() } else { 0.0 };
            l = l.max(copy_lo);
            own.push((e, copy));
        }
        lower.push(l);
        members.push(own);
    }

    let mut rows = Vec::new();
    for (i, &t) in cover.multiplicity.iter().enumerate() {
        if t > 1 {
            let mut c = vec![0.0; width];
            for k in 0..t {
                c[offset[i] + k] = 1.0;
            }
            rows.push(Row::eq(c, net.constraints[i].hi()));
        }
    }
    for (own, &l) in members.iter().zip(&lower) {
        for &(e, copy) in own {
            let mut c = vec![0.0; width];
            c[t_var] = 1.0;
            if cover.multiplicity[e] > 1 {
                c[offset[e] + copy] = -1.0;
                rows.push(Row::le(c, -l));
            } else {
                rows.push(Row::le(c, net.constraints[e].hi() - l));
            }
        }
    }
    let mut objective = vec![0.0; width];
    objective[t_var] = 1.0;
    let LpOutcome::Optimal { x, value } = maximize(&objective, &rows) else {
        return None;
    };
    let uppers = cover
        .multiplicity
        .iter()
        .enumerate()
        .map(|(i, &t)| if t > 1 { x[offset[i]..offset[i] + t].to_vec() } else { vec![net.constraints[i].hi()] })
        .collect();
    Some((value, uppers))
}

fn breakpoints_from_uppers(uppers: &[Vec<f64>]) -> Vec<Vec<f64>> {
    uppers
        .iter()
        .map(|u| {
            let mut acc = 0.0;
            u[..u.len() - 1]
                .iter()
                .map(|d| {
                    acc += d;
                    acc
                })
                .collect()
        })
        .collect()
}

fn build_certificate(
    net: &ConstrainedNetwork,
    cover: &CycleCover,
    first_copy: &[usize],
    uppers: &[Vec<f64>],
    epsilon: f64,
) -> Option<ConsensusCertificate> {
    let breakpoints = breakpoints_from_uppers(uppers);
    let assignment = assignment_for(cover, first_copy);
    let aug = augment_with_assignment(net, cover, &breakpoints, &assignment).ok()?;
    let cycles = aug
        .cover
        .cycles
        .iter()
        .map(|c| CycleWitness {
            edges: c.edges().to_vec(),
            lower: c.edges().iter().map(|&e| aug.network.constraints[e].lo()).fold(f64::NEG_INFINITY, f64::max),
            upper: c.edges().iter().map(|&e| aug.network.constraints[e].hi()).fold(f64::INFINITY, f64::min),
        })
        .collect();
    let cert = ConsensusCertificate { cover: cover.clone(), breakpoints, assignment, cycles, epsilon };
    cert.verify(net).is_ok().then_some(cert)
}

/// Search for a consensus certificate on a compatibly oriented network.
///
/// Candidates are ordered by cover, then lexicographically by the first-copy
/// choice; they are evaluated in parallel and the lowest-index success wins.
pub fn certify_consensus(net: &ConstrainedNetwork, options: &CertificateOptions) -> CertificateOutcome {
    if let Some(edge) = net.constraints.iter().position(|c| !c.is_compatible()) {
        return CertificateOutcome::Inconclusive(InconclusiveReason::IncompatibleOrientation { edge });
    }
    if !net.graph.is_strongly_connected() {
        return CertificateOutcome::Inconclusive(InconclusiveReason::NotStronglyConnected);
    }
    let covers = match enumerate_minimal_covers(&net.graph, options.cover_limit.max(1)) {
        Ok(c) => c,
        Err(CoverError::NotStronglyConnected) => {
            return CertificateOutcome::Inconclusive(InconclusiveReason::NotStronglyConnected)
        }
        Err(e) => return CertificateOutcome::Inconclusive(InconclusiveReason::NoCover { message: e.to_string() }),
    };

    let mut candidates = Vec::new();
    let mut truncated = false;
    for (k, cover) in covers.iter().enumerate() {
        let radices: Vec<usize> = cover.multiplicity.iter().map(|&t| t.max(1)).collect();
        let mut digits = vec![0usize; radices.len()];
        let mut count = 0;
        loop {
            if count == options.assignment_limit {
                truncated = true;
                break;
            }
            candidates.push(Candidate { cover: k, first_copy: digits.clone() });
            count += 1;
            // odometer, last edge fastest
            let mut i = digits.len();
            let done = loop {
                if i == 0 {
                    break true;
                }
                i -= 1;
                digits[i] += 1;
                if digits[i] < radices[i] {
                    break false;
                }
                digits[i] = 0;
            };
            if done {
                break;
            }
        }
    }

    let evaluated: Vec<Option<(f64, Vec<Vec<f64>>)>> = candidates
        .par_iter()
        .map(|c| solve_candidate(net, &covers[c.cover], &c.first_copy))
        .collect();
    let found = candidates.par_iter().zip(&evaluated).find_map_first(|(c, result)| {
        let (value, uppers) = result.as_ref()?;
        if *value < options.epsilon {
            return None;
        }
        build_certificate(net, &covers[c.cover], &c.first_copy, uppers, options.epsilon)
    });
    if let Some(cert) = found {
        return CertificateOutcome::Certified(cert);
    }
    let best_width = evaluated.iter().flatten().map(|(v, _)| *v).fold(f64::NEG_INFINITY, f64::max);
    CertificateOutcome::Inconclusive(InconclusiveReason::NoFeasibleSplitting {
        covers_tried: covers.len(),
        assignments_tried: candidates.len(),
        best_width: if best_width.is_finite() { best_width } else { 0.0 },
        truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shared_edge(iv: [(f64, f64); 5]) -> ConstrainedNetwork {
        let ends = [(0, 1), (1, 2), (2, 0), (0, 3), (3, 2)];
        let rec: Vec<_> = ends.iter().zip(iv).map(|(&(t, h), (lo, hi))| (t, h, lo, hi)).collect();
        ConstrainedNetwork::from_records(4, &rec).unwrap()
    }

    #[test]
    fn triangle_needs_no_split() {
        let net = ConstrainedNetwork::from_records(3, &[(0, 1, 1.0, 2.5), (1, 2, 2.0, 3.0), (2, 0, 0.0, 3.0)]).unwrap();
        let cert = certify_consensus(&net, &CertificateOptions::default()).certificate().cloned().unwrap();
        assert_eq!(cert.cover.multiplicity, vec![1, 1, 1]);
        assert!(cert.breakpoints.iter().all(Vec::is_empty));
        assert_eq!((cert.cycles[0].lower, cert.cycles[0].upper), (2.0, 2.5));
        cert.verify(&net).unwrap();
    }

    #[test]
    fn widened_shared_edge_is_certified() {
        let net = shared_edge([(0.3, 1.0), (0.3, 1.0), (0.3, 1.6), (0.3, 1.0), (0.3, 1.0)]);
        let cert = certify_consensus(&net, &CertificateOptions::default()).certificate().cloned().unwrap();
        assert_eq!(cert.breakpoints[2].len(), 1);
        // both cycles reach the common margin 0.5, forcing the cut at 0.8
        assert!((cert.breakpoints[2][0] - 0.8).abs() < 1e-12);
        for c in &cert.cycles {
            assert!(c.width() >= 0.5 - 1e-12);
        }
        cert.verify(&net).unwrap();
    }

    #[test]
    fn tight_shared_edge_is_inconclusive() {
        let net = shared_edge([(0.3, 1.0), (0.3, 1.0), (0.5, 0.8), (0.3, 1.0), (0.3, 1.0)]);
        match certify_consensus(&net, &CertificateOptions::default()) {
            CertificateOutcome::Inconclusive(InconclusiveReason::NoFeasibleSplitting {
                assignments_tried,
                best_width,
                ..
            }) => {
                assert_eq!(assignments_tried, 2);
                assert!(best_width.abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn verify_rejects_tampering() {
        let net = shared_edge([(0.3, 1.0), (0.3, 1.0), (0.3, 1.6), (0.3, 1.0), (0.3, 1.0)]);
        let cert = certify_consensus(&net, &CertificateOptions::default()).certificate().cloned().unwrap();
        let mut bad = cert.clone();
        bad.breakpoints[2][0] = 1.3;
        assert!(bad.verify(&net).is_err());
        let mut bad = cert.clone();
        bad.cycles[0].upper += 0.1;
        assert!(bad.verify(&net).is_err());
        let narrow = shared_edge([(0.3, 1.0), (0.3, 1.0), (0.5, 0.8), (0.3, 1.0), (0.3, 1.0)]);
        assert!(cert.verify(&narrow).is_err());
    }

    #[test]
    fn precondition_failures() {
        let path = ConstrainedNetwork::from_records(3, &[(0, 1, 0.0, 1.0), (1, 2, 0.0, 1.0)]).unwrap();
        assert_eq!(
            certify_consensus(&path, &CertificateOptions::default()),
            CertificateOutcome::Inconclusive(InconclusiveReason::NotStronglyConnected)
        );
        let bad = ConstrainedNetwork::from_records(2, &[(0, 1, -1.0, 1.0), (1, 0, 0.0, 1.0)]).unwrap();
        assert_eq!(
            certify_consensus(&bad, &CertificateOptions::default()),
            CertificateOutcome::Inconclusive(InconclusiveReason::IncompatibleOrientation { edge: 0 })
        );
    }

    /// Margin for one assignment in closed form: single-copy edges bound it
    /// by `hi − L`, a split edge by its upper bound less the summed lower
    /// bounds of the cycles through it, shared evenly among its copies.
    fn closed_form(net: &ConstrainedNetwork, cover: &CycleCover, first_copy: &[usize]) -> f64 {
        let m = net.edge_count();
        let mut rank = vec![0; m];
        let mut lower = Vec::new();
        let mut of_edge: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (k, c) in cover.cycles.iter().enumerate() {
            let mut l = f64::NEG_INFINITY;
            for &e in c.edges() {
                let lo = if rank[e] == first_copy[e] { net.constraints[e].lo() } else { 0.0 };
                rank[e] += 1;
                l = l.max(lo);
                of_edge[e].push(k);
            }
            lower.push(l);
        }
        let mut best = f64::INFINITY;
        for e in 0..m {
            let t = cover.multiplicity[e];
            let hi = net.constraints[e].hi();
            if t == 1 {
                best = best.min(hi - lower[of_edge[e][0]]);
            } else {
                let sum: f64 = of_edge[e].iter().map(|&k| lower[k]).sum();
                best = best.min((hi - sum) / t as f64);
            }
        }
        best
    }

    #[test]
    fn lp_margin_matches_closed_form() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        // two triangles sharing edge 2 plus a third cycle through edges 2 and 5
        let ends = [(0, 1), (1, 2), (2, 0), (0, 3), (3, 2), (0, 4), (4, 2)];
        for _ in 0..200 {
            let rec: Vec<_> = ends
                .iter()
                .map(|&(t, h)| {
                    let lo: f64 = rng.random_range(0.0..1.0);
                    (t, h, lo, lo + rng.random_range(0.05..2.5))
                })
                .collect();
            let net = ConstrainedNetwork::from_records(5, &rec).unwrap();
            let cover = crate::cover::minimal_cover(&net.graph).unwrap();
            for r0 in 0..cover.multiplicity[2] {
                let mut first = vec![0; net.edge_count()];
                first[2] = r0;
                let oracle = closed_form(&net, &cover, &first);
                match solve_candidate(&net, &cover, &first) {
                    Some((value, _)) => assert!((value - oracle).abs() < 1e-9, "{value} vs {oracle}"),
                    None => assert!(oracle < 0.0, "LP infeasible but oracle gives {oracle}"),
                }
            }
        }
    }
}
