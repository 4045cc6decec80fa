use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::hamiltonian::Hamiltonian;
use crate::constraint::{ConstrainedNetwork, FlowConstraint};
use crate::graph::{DirectedGraph, TerminalPattern};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SystemError {
    #[error("{what}: expected length {expected}, got {got}")]
    Dimension { what: &'static str, expected: usize, got: usize },
    #[error("{what} must be strictly positive and finite")]
    NonPositive { what: &'static str },
}

/// Storage per vertex and controller state per edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    pub x: Vec<f64>,
    pub xc: Vec<f64>,
}

impl NetworkState {
    pub fn new(x: Vec<f64>, xc: Vec<f64>) -> Self {
        Self { x, xc }
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Self { x: vec![0.0; n], xc: vec![0.0; m] }
    }
}

/// Time derivative of a [`NetworkState`].
pub type StateDerivative = NetworkState;

#[derive(Debug, Clone, PartialEq)]
pub enum Control {
    /// Saturated PI with `R = I` and `H_c = ½‖x_c‖²`.
    Saturated { constraints: Vec<FlowConstraint> },
    /// Unsaturated PI with diagonal gain `R` and `H_c = ½ Σ kⱼ x_cⱼ²`.
    Unconstrained { gains: Vec<f64>, controller_weights: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct NetworkSystem {
    pub graph: DirectedGraph,
    pub hamiltonian: Hamiltonian,
    pub terminals: TerminalPattern,
    pub disturbance: Vec<f64>,
    pub control: Control,
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), SystemError> {
    if expected == got {
        Ok(())
    } else {
        Err(SystemError::Dimension { what, expected, got })
    }
}

impl NetworkSystem {
    pub fn saturated(
        net: ConstrainedNetwork,
        hamiltonian: Hamiltonian,
        terminals: TerminalPattern,
        disturbance: Vec<f64>,
    ) -> Result<Self, SystemError> {
        check_len("hamiltonian", net.graph.vertex_count(), hamiltonian.vertex_count())?;
        check_len("disturbance", terminals.len(), disturbance.len())?;
        Ok(Self {
            graph: net.graph,
            hamiltonian,
            terminals,
            disturbance,
            control: Control::Saturated { constraints: net.constraints },
        })
    }

    /// Saturated system with `H = ½‖x‖²` and no in/outflow.
    pub fn saturated_identity(net: ConstrainedNetwork) -> Self {
        let n = net.graph.vertex_count();
        Self::saturated(net, Hamiltonian::identity(n), TerminalPattern::empty(), Vec::new())
            .expect("identity hamiltonian matches the graph")
    }

    pub fn unconstrained(
        graph: DirectedGraph,
        hamiltonian: Hamiltonian,
        terminals: TerminalPattern,
        disturbance: Vec<f64>,
        gains: Vec<f64>,
        controller_weights: Vec<f64>,
    ) -> Result<Self, SystemError> {
        let m = graph.edge_count();
        check_len("hamiltonian", graph.vertex_count(), hamiltonian.vertex_count())?;
        check_len("disturbance", terminals.len(), disturbance.len())?;
        check_len("gains", m, gains.len())?;
        check_len("controller weights", m, controller_weights.len())?;
        if gains.iter().chain(&controller_weights).any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(SystemError::NonPositive { what: "gains and controller weights" });
        }
        Ok(Self {
            graph,
            hamiltonian,
            terminals,
            disturbance,
            control: Control::Unconstrained { gains, controller_weights },
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }

    pub fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }

    pub fn is_saturated(&self) -> bool {
        matches!(self.control, Control::Saturated { .. })
    }

    /// The constrained network, in saturated mode.
    pub fn network(&self) -> Option<ConstrainedNetwork> {
        match &self.control {
            Control::Saturated { constraints } => Some(ConstrainedNetwork {
                graph: self.graph.clone(),
                constraints: constraints.clone(),
            }),
            Control::Unconstrained { .. } => None,
        }
    }

    /// `E d̄`.
    pub fn inflow(&self) -> Vec<f64> {
        self.terminals.apply(self.vertex_count(), &self.disturbance)
    }

    /// `𝟙ᵀ E d̄`.
    pub fn net_inflow(&self) -> f64 {
        self.inflow().iter().sum()
    }

    pub fn check_state(&self, state: &NetworkState) -> Result<(), SystemError> {
        check_len("x", self.vertex_count(), state.x.len())?;
        check_len("x_c", self.edge_count(), state.xc.len())
    }

    /// Same system without in/outflow.
    pub fn without_disturbance(&self) -> Self {
        Self {
            terminals: TerminalPattern::empty(),
            disturbance: Vec::new(),
            ..self.clone()
        }
    }

    pub(crate) fn workspace(&self) -> Workspace {
        Workspace {
            grad: vec![0.0; self.vertex_count()],
            edge: vec![0.0; self.edge_count()],
            flow: vec![0.0; self.edge_count()],
            inflow: self.inflow(),
        }
    }

    /// Flow input `u` at `state`: saturated `sat(−Bᵀ∇H − x_c)` or
    /// `−R Bᵀ∇H − ∇H_c(x_c)`.
    pub fn flows(&self, state: &NetworkState) -> Vec<f64> {
        let mut ws = self.workspace();
        self.hamiltonian.gradient_into(&state.x, &mut ws.grad);
        self.flows_from_grad(&state.xc, &mut ws);
        ws.flow
    }

    /// Controller output before saturation, `−Bᵀ∇H − x_c`; equal to the
    /// flows in unconstrained mode.
    pub fn controller_input(&self, state: &NetworkState) -> Vec<f64> {
        match &self.control {
            Control::Saturated { .. } => {
                let y = self.graph.apply_incidence_transpose(&self.hamiltonian.gradient(&state.x));
                y.iter().zip(&state.xc).map(|(y, xc)| -y - xc).collect()
            }
            Control::Unconstrained { .. } => self.flows(state),
        }
    }

    fn flows_from_grad(&self, xc: &[f64], ws: &mut Workspace) {
        self.graph.apply_incidence_transpose_into(&ws.grad, &mut ws.edge);
        match &self.control {
            Control::Saturated { constraints } => {
                for (((u, y), c), xcj) in ws.flow.iter_mut().zip(&ws.edge).zip(constraints).zip(xc) {
                    *u = c.saturate(-y - xcj);
                }
            }
            Control::Unconstrained { gains, controller_weights } => {
                for ((((u, y), r), k), xcj) in ws
                    .flow
                    .iter_mut()
                    .zip(&ws.edge)
                    .zip(gains)
                    .zip(controller_weights)
                    .zip(xc)
                {
                    *u = -r * y - k * xcj;
                }
            }
        }
    }

    /// Closed-loop vector field; both modes reduce to
    /// `ẋ = B u + E d̄`, `ẋ_c = Bᵀ∇H(x)`.
    pub(crate) fn eval_into(&self, x: &[f64], xc: &[f64], dx: &mut [f64], dxc: &mut [f64], ws: &mut Workspace) {
        self.hamiltonian.gradient_into(x, &mut ws.grad);
        self.flows_from_grad(xc, ws);
        self.graph.apply_incidence_into(&ws.flow, dx);
        for (d, f) in dx.iter_mut().zip(&ws.inflow) {
            *d += f;
        }
        dxc.copy_from_slice(&ws.edge);
    }

    pub fn rhs(&self, state: &NetworkState) -> StateDerivative {
        let mut ws = self.workspace();
        let mut d = NetworkState::zeros(self.vertex_count(), self.edge_count());
        self.eval_into(&state.x, &state.xc, &mut d.x, &mut d.xc, &mut ws);
        d
    }
}

pub(crate) struct Workspace {
    pub grad: Vec<f64>,
    pub edge: Vec<f64>,
    pub flow: Vec<f64>,
    pub inflow: Vec<f64>,
}

/// `ẋ = B sat(−Bᵀ∇H(x) − x_c; u⁻, u⁺) + E d̄`, `ẋ_c = Bᵀ∇H(x)`.
///
/// Panics if `system` is not in saturated mode.
pub fn rhs_constrained(system: &NetworkSystem, state: &NetworkState) -> StateDerivative {
    assert!(system.is_saturated(), "rhs_constrained needs a saturated system");
    system.rhs(state)
}

/// `ẋ = −B R Bᵀ∇H(x) − B ∇H_c(x_c) + E d̄`, `ẋ_c = Bᵀ∇H(x)`.
///
/// Panics if `system` is in saturated mode.
pub fn rhs_unconstrained(system: &NetworkSystem, state: &NetworkState) -> StateDerivative {
    assert!(!system.is_saturated(), "rhs_unconstrained needs an unconstrained system");
    system.rhs(state)
}
