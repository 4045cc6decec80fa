//! Flow constraint intervals, the saturation function, and the rewrites that
//! preserve the closed-loop storage dynamics: disturbance absorption,
//! orientation normalization and edge splitting.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{DirectedGraph, Edge, GraphError, TerminalPattern};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConstraintError {
    #[error("constraint interval [{lo}, {hi}] must satisfy lo < hi with finite bounds")]
    EmptyInterval { lo: f64, hi: f64 },
    #[error("{constraints} constraints given for {edges} edges")]
    CountMismatch { edges: usize, constraints: usize },
    #[error("vector of length {got} given where {expected} was expected")]
    LengthMismatch { expected: usize, got: usize },
    #[error("edge {0} does not exist")]
    NoSuchEdge(usize),
    #[error("breakpoints for edge {edge} must be strictly ascending inside ({lo}, {hi}): {breakpoints:?}")]
    InvalidBreakpoints { edge: usize, lo: f64, hi: f64, breakpoints: Vec<f64> },
    #[error("disturbance cannot be matched: {0}")]
    NoMatching(MatchFailure),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Closed interval `[lo, hi]` bounding the flow on one edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "(f64, f64)", into = "(f64, f64)")]
pub struct FlowConstraint {
    lo: f64,
    hi: f64,
}

impl TryFrom<(f64, f64)> for FlowConstraint {
    type Error = ConstraintError;

    fn try_from((lo, hi): (f64, f64)) -> Result<Self, Self::Error> {
        FlowConstraint::new(lo, hi)
    }
}

impl From<FlowConstraint> for (f64, f64) {
    fn from(c: FlowConstraint) -> Self {
        (c.lo, c.hi)
    }
}

impl FlowConstraint {
    pub fn new(lo: f64, hi: f64) -> Result<Self, ConstraintError> {
        if lo.is_finite() && hi.is_finite() && lo < hi {
            Ok(Self { lo, hi })
        } else {
            Err(ConstraintError::EmptyInterval { lo, hi })
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// `u⁺ > 0` and `u⁻ ≥ 0`.
    pub fn is_compatible(&self) -> bool {
        self.hi > 0.0 && self.lo >= 0.0
    }

    pub fn saturate(&self, z: f64) -> f64 {
        sat(z, self.lo, self.hi)
    }

    pub fn antiderivative(&self, z: f64) -> f64 {
        sat_antiderivative(z, *self)
    }

    pub fn shifted(&self, by: f64) -> Result<Self, ConstraintError> {
        Self::new(self.lo + by, self.hi + by)
    }

    pub fn negated(&self) -> Self {
        Self { lo: -self.hi, hi: -self.lo }
    }
}

/// Scalar saturation. `lo < hi` is assumed.
#[inline]
pub fn sat(z: f64, lo: f64, hi: f64) -> f64 {
    if z <= lo {
        lo
    } else if z >= hi {
        hi
    } else {
        z
    }
}

pub fn saturate(z: &[f64], constraints: &[FlowConstraint]) -> Result<Vec<f64>, ConstraintError> {
    if z.len() != constraints.len() {
        return Err(ConstraintError::LengthMismatch { expected: constraints.len(), got: z.len() });
    }
    Ok(z.iter().zip(constraints).map(|(&zi, c)| c.saturate(zi)).collect())
}

/// `∫₀^z sat(y; lo, hi) dy`, evaluated in closed form.
pub fn sat_antiderivative(z: f64, c: FlowConstraint) -> f64 {
    // primitive of sat, continuous at both breakpoints
    let primitive = |y: f64| {
        if y <= c.lo {
            c.lo * y - 0.5 * c.lo * c.lo
        } else if y >= c.hi {
            c.hi * y - 0.5 * c.hi * c.hi
        } else {
            0.5 * y * y
        }
    };
    primitive(z) - primitive(0.0)
}

/// A graph together with one flow interval per edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstrainedNetwork {
    pub graph: DirectedGraph,
    pub constraints: Vec<FlowConstraint>,
}

impl ConstrainedNetwork {
    pub fn new(graph: DirectedGraph, constraints: Vec<FlowConstraint>) -> Result<Self, ConstraintError> {
        if graph.edge_count() != constraints.len() {
            return Err(ConstraintError::CountMismatch {
                edges: graph.edge_count(),
                constraints: constraints.len(),
            });
        }
        Ok(Self { graph, constraints })
    }

    /// Convenience constructor from `(tail, head, lo, hi)` records.
    pub fn from_records(n: usize, records: &[(usize, usize, f64, f64)]) -> Result<Self, ConstraintError> {
        let graph = DirectedGraph::new(n, records.iter().map(|r| (r.0, r.1)))?;
        let constraints = records
            .iter()
            .map(|r| FlowConstraint::new(r.2, r.3))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(graph, constraints)
    }

    pub fn edge_count(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_compatible(&self) -> bool {
        self.constraints.iter().all(FlowConstraint::is_compatible)
    }

    pub fn lower(&self) -> Vec<f64> {
        self.constraints.iter().map(|c| c.lo).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.constraints.iter().map(|c| c.hi).collect()
    }
}

/// Where one original edge went in a transformed network.
///
/// A transformed controller state is initialized as
/// `xc'[target] = sign * xc[source] + offset`, and the original flow is
/// recovered as `u[source] = Σ sign * u'[target]` over the images.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeImage {
    pub target: usize,
    pub sign: i8,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeMapping {
    pub images: Vec<Vec<EdgeImage>>,
    pub target_edges: usize,
}

impl EdgeMapping {
    pub fn identity(m: usize) -> Self {
        Self {
            images: (0..m).map(|j| vec![EdgeImage { target: j, sign: 1, offset: 0.0 }]).collect(),
            target_edges: m,
        }
    }

    pub fn source_edges(&self) -> usize {
        self.images.len()
    }

    pub fn is_identity(&self) -> bool {
        self.target_edges == self.images.len()
            && self.images.iter().enumerate().all(|(j, im)| {
                im.len() == 1 && im[0].target == j && im[0].sign == 1 && im[0].offset == 0.0
            })
    }

    /// Source edge of every target edge. `None` if some target has no
    /// preimage or more than one.
    pub fn sources(&self) -> Option<Vec<usize>> {
        let mut src = vec![None; self.target_edges];
        for (j, images) in self.images.iter().enumerate() {
            for im in images {
                match src.get_mut(im.target)? {
                    slot @ None => *slot = Some(j),
                    Some(_) => return None,
                }
            }
        }
        src.into_iter().collect()
    }

    /// Apply `self` then `next`.
    pub fn then(&self, next: &EdgeMapping) -> EdgeMapping {
        debug_assert_eq!(self.target_edges, next.source_edges());
        let images = self
            .images
            .iter()
            .map(|ims| {
                ims.iter()
                    .flat_map(|a| {
                        next.images[a.target].iter().map(move |b| EdgeImage {
                            target: b.target,
                            sign: a.sign * b.sign,
                            offset: b.sign as f64 * a.offset + b.offset,
                        })
                    })
                    .collect()
            })
            .collect();
        EdgeMapping { images, target_edges: next.target_edges }
    }

    pub fn map_controller_state(&self, xc: &[f64]) -> Vec<f64> {
        debug_assert_eq!(xc.len(), self.images.len());
        let mut out = vec![0.0; self.target_edges];
        for (images, &v) in self.images.iter().zip(xc) {
            for im in images {
                out[im.target] = im.sign as f64 * v + im.offset;
            }
        }
        out
    }

    /// Inverse of [`map_controller_state`](Self::map_controller_state), read
    /// off the first image of each edge.
    pub fn recover_controller_state(&self, xc_target: &[f64]) -> Vec<f64> {
        self.images
            .iter()
            .map(|ims| {
                let im = ims[0];
                im.sign as f64 * (xc_target[im.target] - im.offset)
            })
            .collect()
    }

    pub fn reconstruct_flows(&self, u_target: &[f64]) -> Vec<f64> {
        debug_assert_eq!(u_target.len(), self.target_edges);
        self.images
            .iter()
            .map(|ims| ims.iter().map(|im| im.sign as f64 * u_target[im.target]).sum())
            .collect()
    }
}

/// Reverse hi ≤ 0 edges and split bi-directional ones so that every
/// interval satisfies `hi > 0`, `lo ≥ 0`.
///
/// Edges keep their relative order; a bi-directional edge becomes a forward
/// copy `[0, hi]` followed by a reversed copy `[0, -lo]`.
pub fn normalize_orientation(net: &ConstrainedNetwork) -> (ConstrainedNetwork, EdgeMapping) {
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut constraints = Vec::new();
    let mut images = Vec::with_capacity(net.edge_count());

    let mut push = |e: Edge, c: FlowConstraint, sign: i8, edges: &mut Vec<(usize, usize)>| {
        edges.push((e.tail, e.head));
        constraints.push(c);
        EdgeImage { target: edges.len() - 1, sign, offset: 0.0 }
    };

    for (e, c) in net.graph.edges().iter().zip(&net.constraints) {
        let e = *e;
        let mut ims = Vec::new();
        if c.lo >= 0.0 {
            ims.push(push(e, *c, 1, &mut edges));
        } else if c.hi <= 0.0 {
            ims.push(push(e.reversed(), c.negated(), -1, &mut edges));
        } else {
            ims.push(push(e, FlowConstraint { lo: 0.0, hi: c.hi }, 1, &mut edges));
            ims.push(push(e.reversed(), FlowConstraint { lo: 0.0, hi: -c.lo }, -1, &mut edges));
        }
        images.push(ims);
    }

    let target_edges = edges.len();
    let graph = DirectedGraph::new(net.graph.vertex_count(), edges)
        .expect("reversing or copying an edge keeps the graph valid");
    (
        ConstrainedNetwork { graph, constraints },
        EdgeMapping { images, target_edges },
    )
}

pub(crate) fn check_breakpoints(edge: usize, c: FlowConstraint, breakpoints: &[f64]) -> Result<(), ConstraintError> {
    let mut prev = c.lo;
    for &b in breakpoints.iter().chain(std::iter::once(&c.hi)) {
        if !(b.is_finite() && b > prev) {
            return Err(ConstraintError::InvalidBreakpoints {
                edge,
                lo: c.lo,
                hi: c.hi,
                breakpoints: breakpoints.to_vec(),
            });
        }
        prev = b;
    }
    Ok(())
}

/// Sub-intervals `[lo, b₁], [0, b₂−b₁], …, [0, hi−b_last]` with controller
/// offsets `0, b₁, …, b_last`.
pub(crate) fn split_intervals(c: FlowConstraint, breakpoints: &[f64]) -> Vec<(FlowConstraint, f64)> {
    if breakpoints.is_empty() {
        return vec![(c, 0.0)];
    }
    let mut out = Vec::with_capacity(breakpoints.len() + 1);
    out.push((FlowConstraint { lo: c.lo, hi: breakpoints[0] }, 0.0));
    for w in breakpoints.windows(2) {
        out.push((FlowConstraint { lo: 0.0, hi: w[1] - w[0] }, w[0]));
    }
    let last = *breakpoints.last().unwrap();
    out.push((FlowConstraint { lo: 0.0, hi: c.hi - last }, last));
    out
}

/// Split several edges at once. `breakpoints[i]` lists the cut points for
/// edge `i`; copies of one edge are placed consecutively in edge order.
pub fn split_edges(
    net: &ConstrainedNetwork,
    breakpoints: &[Vec<f64>],
) -> Result<(ConstrainedNetwork, EdgeMapping), ConstraintError> {
    if breakpoints.len() != net.edge_count() {
        return Err(ConstraintError::LengthMismatch { expected: net.edge_count(), got: breakpoints.len() });
    }
    let mut edges = Vec::new();
    let mut constraints = Vec::new();
    let mut images = Vec::with_capacity(net.edge_count());
    for (i, ((e, c), bps)) in net.graph.edges().iter().zip(&net.constraints).zip(breakpoints).enumerate() {
        check_breakpoints(i, *c, bps)?;
        let mut ims = Vec::with_capacity(bps.len() + 1);
        for (sub, offset) in split_intervals(*c, bps) {
            edges.push((e.tail, e.head));
            constraints.push(sub);
            ims.push(EdgeImage { target: edges.len() - 1, sign: 1, offset });
        }
        images.push(ims);
    }
    let target_edges = edges.len();
    let graph = DirectedGraph::new(net.graph.vertex_count(), edges)?;
    Ok((ConstrainedNetwork { graph, constraints }, EdgeMapping { images, target_edges }))
}

/// Replace `edge` by parallel copies cut at `breakpoints`.
pub fn split_edge(
    net: &ConstrainedNetwork,
    edge: usize,
    breakpoints: &[f64],
) -> Result<(ConstrainedNetwork, EdgeMapping), ConstraintError> {
    if edge >= net.edge_count() {
        return Err(ConstraintError::NoSuchEdge(edge));
    }
    let mut all = vec![Vec::new(); net.edge_count()];
    all[edge] = breakpoints.to_vec();
    split_edges(net, &all)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatchFailure {
    /// Total inflow differs from total outflow.
    Imbalanced,
    /// `E d̄` is outside the image of `B`.
    NotInImage,
}

impl std::fmt::Display for MatchFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MatchFailure::Imbalanced => write!(f, "total inflow does not equal total outflow"),
            MatchFailure::NotInImage => write!(f, "in/outflow is not in the image of the incidence matrix"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// `𝟙ᵀ E d̄`.
    pub imbalance: f64,
    /// `‖B x̄_c − E d̄‖` of the least-squares solution.
    pub residual: f64,
    pub tolerance: f64,
    /// Minimum-norm solution of `B x̄_c = E d̄`, present when matchable.
    pub xbar_c: Option<Vec<f64>>,
    pub failure: Option<MatchFailure>,
}

impl MatchResult {
    pub fn is_matchable(&self) -> bool {
        self.failure.is_none()
    }
}

/// Relative tolerance used for the matching residual and the imbalance test.
pub const MATCHING_RTOL: f64 = 1e-9;

/// Minimum-norm least-squares `x̄_c` with `B x̄_c = E d̄`, with the residual
/// test `‖B x̄_c − E d̄‖ ≤ 1e-9 (1 + ‖E d̄‖)`.
pub fn solve_matching(
    graph: &DirectedGraph,
    terminals: &TerminalPattern,
    dbar: &[f64],
) -> Result<MatchResult, ConstraintError> {
    if dbar.len() != terminals.len() {
        return Err(ConstraintError::LengthMismatch { expected: terminals.len(), got: dbar.len() });
    }
    let n = graph.vertex_count();
    let m = graph.edge_count();
    let ed = terminals.apply(n, dbar);
    let ed_norm = ed.iter().map(|v| v * v).sum::<f64>().sqrt();
    let tolerance = MATCHING_RTOL * (1.0 + ed_norm);
    let imbalance: f64 = ed.iter().sum();

    let xbar = if m == 0 || ed_norm == 0.0 {
        vec![0.0; m]
    } else {
        let b = DMatrix::from_fn(n, m, |r, c| graph.incidence().get(r, c) as f64);
        let rhs = DVector::from_column_slice(&ed);
        let svd = b.svd(true, true);
        let sol = svd
            .solve(&rhs, 1e-10)
            .expect("both singular vector sets were requested");
        sol.iter().copied().collect()
    };
    let bx = graph.apply_incidence(&xbar);
    let residual = bx.iter().zip(&ed).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();

    let failure = if imbalance.abs() > tolerance {
        Some(MatchFailure::Imbalanced)
    } else if residual > tolerance {
        Some(MatchFailure::NotInImage)
    } else {
        None
    };
    Ok(MatchResult {
        imbalance,
        residual,
        tolerance,
        xbar_c: failure.is_none().then_some(xbar),
        failure,
    })
}

/// Fold the constant in/outflow into the flow intervals.
///
/// Returns the network with intervals `[lo + x̄_c, hi + x̄_c]` and the
/// matching `x̄_c`. The absorbed closed loop runs on `x̃_c = x_c − x̄_c`.
pub fn absorb_disturbance(
    net: &ConstrainedNetwork,
    terminals: &TerminalPattern,
    dbar: &[f64],
) -> Result<(ConstrainedNetwork, Vec<f64>), ConstraintError> {
    let matching = solve_matching(&net.graph, terminals, dbar)?;
    let xbar = match (matching.xbar_c, matching.failure) {
        (Some(x), None) => x,
        (_, Some(f)) => return Err(ConstraintError::NoMatching(f)),
        (None, None) => unreachable!("matchable results carry x̄_c"),
    };
    let constraints = net
        .constraints
        .iter()
        .zip(&xbar)
        .map(|(c, &s)| c.shifted(s))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((ConstrainedNetwork { graph: net.graph.clone(), constraints }, xbar))
}
