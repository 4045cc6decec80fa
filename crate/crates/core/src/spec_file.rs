//! JSON network description: graph, flow intervals, in/outflow, storage
//! energy, controller and initial state.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "vertices": 3,
//!   "edges": [{ "tail": 0, "head": 1, "lo": 1, "hi": 2.5 }],
//!   "terminals": [{ "vertex": 0, "sign": 1 }],
//!   "disturbance": [1.0],
//!   "hamiltonian": { "kind": "quadratic", "weights": [1, 1, 1] },
//!   "control": { "mode": "saturated" },
//!   "initial": { "random": { "seed": 7, "x_range": [-5, 5] } }
//! }
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraint::{ConstrainedNetwork, FlowConstraint};
use crate::dynamics::{Hamiltonian, NetworkState, NetworkSystem, NAMED_HAMILTONIANS};
use crate::graph::{DirectedGraph, Terminal, TerminalPattern};

pub const SPEC_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> SpecError {
    SpecError::Invalid { field: field.into(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub tail: usize,
    pub head: usize,
    /// Flow bounds; required for saturated control.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminalRecord {
    pub vertex: usize,
    pub sign: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HamiltonianSpec {
    /// `½ Σ cᵢ xᵢ²`; all ones when `weights` is omitted.
    Quadratic {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
    Named { name: String },
}

impl Default for HamiltonianSpec {
    fn default() -> Self {
        HamiltonianSpec::Quadratic { weights: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlSpec {
    // braces so that stray fields such as `gains` are rejected
    Saturated {},
    /// PI control without flow bounds; `gains` is the proportional
    /// resistance per edge, `controller_weights` the integral energy.
    Unconstrained {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gains: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        controller_weights: Option<Vec<f64>>,
    },
}

impl Default for ControlSpec {
    fn default() -> Self {
        ControlSpec::Saturated {}
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomInitial {
    pub seed: u64,
    #[serde(default = "default_x_range")]
    pub x_range: [f64; 2],
    #[serde(default = "default_xc_range")]
    pub xc_range: [f64; 2],
}

fn default_x_range() -> [f64; 2] {
    [-5.0, 5.0]
}

fn default_xc_range() -> [f64; 2] {
    [0.0, 0.0]
}

impl RandomInitial {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, x_range: default_x_range(), xc_range: default_xc_range() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialSpec {
    Explicit {
        x: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        xc: Option<Vec<f64>>,
    },
    Random { random: RandomInitial },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpecFile {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub vertices: usize,
    pub edges: Vec<EdgeRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terminals: Vec<TerminalRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub disturbance: Vec<f64>,
    #[serde(default)]
    pub hamiltonian: HamiltonianSpec,
    #[serde(default)]
    pub control: ControlSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSpec>,
}

fn check_positive(field: &str, values: &[f64], expected: usize) -> Result<(), SpecError> {
    if values.len() != expected {
        return Err(invalid(field, format!("expected {expected} values, got {}", values.len())));
    }
    if let Some(k) = values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(invalid(format!("{field}[{k}]"), format!("must be positive, got {}", values[k])));
    }
    Ok(())
}

fn check_finite(field: &str, values: &[f64], expected: usize) -> Result<(), SpecError> {
    if values.len() != expected {
        return Err(invalid(field, format!("expected {expected} values, got {}", values.len())));
    }
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        return Err(invalid(format!("{field}[{k}]"), "must be finite"));
    }
    Ok(())
}

fn check_range(field: &str, r: [f64; 2]) -> Result<(), SpecError> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
        return Err(invalid(field, format!("need finite lo ≤ hi, got [{}, {}]", r[0], r[1])));
    }
    Ok(())
}

impl NetworkSpecFile {
    /// Parse and validate.
    pub fn from_json(text: &str) -> Result<Self, SpecError> {
        let spec: Self = serde_json::from_str(text).map_err(|e| SpecError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec documents always serialize")
    }

    /// Spec of a saturated network with identity storage energy.
    pub fn from_network(net: &ConstrainedNetwork) -> Self {
        Self {
            schema_version: SPEC_SCHEMA_VERSION,
            name: None,
            vertices: net.graph.vertex_count(),
            edges: net
                .graph
                .edges()
                .iter()
                .zip(&net.constraints)
                .map(|(e, c)| EdgeRecord { tail: e.tail, head: e.head, lo: Some(c.lo()), hi: Some(c.hi()) })
                .collect(),
            terminals: Vec::new(),
            disturbance: Vec::new(),
            hamiltonian: HamiltonianSpec::default(),
            control: ControlSpec::Saturated {},
            initial: None,
        }
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if self.schema_version != SPEC_SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("unsupported version {}, expected {SPEC_SCHEMA_VERSION}", self.schema_version),
            ));
        }
        let n = self.vertices;
        if n == 0 {
            return Err(invalid("vertices", "need at least one vertex"));
        }
        let saturated = matches!(self.control, ControlSpec::Saturated {});
        for (k, e) in self.edges.iter().enumerate() {
            for (what, v) in [("tail", e.tail), ("head", e.head)] {
                if v >= n {
                    return Err(invalid(format!("edges[{k}].{what}"), format!("vertex {v} out of range 0..{n}")));
                }
            }
            if e.tail == e.head {
                return Err(invalid(format!("edges[{k}]"), "self-loops are not allowed"));
            }
            match (e.lo, e.hi) {
                (Some(lo), Some(hi)) => {
                    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                        return Err(invalid(format!("edges[{k}]"), format!("need finite lo < hi, got [{lo}, {hi}]")));
                    }
                }
                (None, None) if !saturated => {}
                _ if saturated => {
                    return Err(invalid(format!("edges[{k}]"), "saturated control needs both lo and hi"));
                }
                _ => return Err(invalid(format!("edges[{k}]"), "give both lo and hi or neither")),
            }
        }
        for (k, t) in self.terminals.iter().enumerate() {
            if t.vertex >= n {
                return Err(invalid(format!("terminals[{k}].vertex"), format!("vertex {} out of range 0..{n}", t.vertex)));
            }
            if t.sign != 1 && t.sign != -1 {
                return Err(invalid(format!("terminals[{k}].sign"), format!("must be 1 or -1, got {}", t.sign)));
            }
        }
        if self.disturbance.len() != self.terminals.len() {
            return Err(invalid(
                "disturbance",
                format!("expected one value per terminal ({}), got {}", self.terminals.len(), self.disturbance.len()),
            ));
        }
        check_finite("disturbance", &self.disturbance, self.terminals.len())?;
        match &self.hamiltonian {
            HamiltonianSpec::Quadratic { weights: Some(w) } => check_positive("hamiltonian.weights", w, n)?,
            HamiltonianSpec::Quadratic { weights: None } => {}
            HamiltonianSpec::Named { name } => {
                if !NAMED_HAMILTONIANS.contains(&name.as_str()) {
                    return Err(invalid(
                        "hamiltonian.name",
                        format!("unknown energy {name:?}; known: {}", NAMED_HAMILTONIANS.join(", ")),
                    ));
                }
            }
        }
        let m = self.edges.len();
        if let ControlSpec::Unconstrained { gains, controller_weights } = &self.control {
            if let Some(g) = gains {
                check_positive("control.gains", g, m)?;
            }
            if let Some(k) = controller_weights {
                check_positive("control.controller_weights", k, m)?;
            }
        }
        match &self.initial {
            Some(InitialSpec::Explicit { x, xc }) => {
                check_finite("initial.x", x, n)?;
                if let Some(xc) = xc {
                    check_finite("initial.xc", xc, m)?;
                }
            }
            Some(InitialSpec::Random { random }) => {
                check_range("initial.random.x_range", random.x_range)?;
                check_range("initial.random.xc_range", random.xc_range)?;
            }
            None => {}
        }
        Ok(())
    }

    pub fn graph(&self) -> Result<DirectedGraph, SpecError> {
        DirectedGraph::new(self.vertices, self.edges.iter().map(|e| (e.tail, e.head)))
            .map_err(|e| invalid("edges", e.to_string()))
    }

    /// Graph with flow intervals; `None` when any edge lacks bounds.
    pub fn network(&self) -> Result<Option<ConstrainedNetwork>, SpecError> {
        let graph = self.graph()?;
        let mut constraints = Vec::with_capacity(self.edges.len());
        for (k, e) in self.edges.iter().enumerate() {
            let (Some(lo), Some(hi)) = (e.lo, e.hi) else { return Ok(None) };
            constraints.push(FlowConstraint::new(lo, hi).map_err(|err| invalid(format!("edges[{k}]"), err.to_string()))?);
        }
        let net = ConstrainedNetwork::new(graph, constraints).map_err(|e| invalid("edges", e.to_string()))?;
        Ok(Some(net))
    }

    pub fn hamiltonian(&self) -> Hamiltonian {
        match &self.hamiltonian {
            HamiltonianSpec::Quadratic { weights: None } => Hamiltonian::identity(self.vertices),
            HamiltonianSpec::Quadratic { weights: Some(w) } => {
                Hamiltonian::quadratic(w.clone()).expect("weights validated positive")
            }
            HamiltonianSpec::Named { name } => Hamiltonian::named(name, self.vertices).expect("name validated"),
        }
    }

    pub fn terminals(&self) -> TerminalPattern {
        let cols = self.terminals.iter().map(|t| Terminal { vertex: t.vertex, sign: t.sign }).collect();
        TerminalPattern::new(self.vertices, cols).expect("terminals validated")
    }

    pub fn to_system(&self) -> Result<NetworkSystem, SpecError> {
        self.validate()?;
        let h = self.hamiltonian();
        let terminals = self.terminals();
        let dbar = self.disturbance.clone();
        let m = self.edges.len();
        match &self.control {
            ControlSpec::Saturated {} => {
                let net = self.network()?.expect("saturated specs carry bounds");
                NetworkSystem::saturated(net, h, terminals, dbar).map_err(|e| invalid("network", e.to_string()))
            }
            ControlSpec::Unconstrained { gains, controller_weights } => NetworkSystem::unconstrained(
                self.graph()?,
                h,
                terminals,
                dbar,
                gains.clone().unwrap_or_else(|| vec![1.0; m]),
                controller_weights.clone().unwrap_or_else(|| vec![1.0; m]),
            )
            .map_err(|e| invalid("control", e.to_string())),
        }
    }

    /// Initial state and the seed used to draw it, if random. A `seed`
    /// argument forces a random draw (ranges from the file when present).
    pub fn initial_state(&self, seed: Option<u64>) -> (NetworkState, Option<u64>) {
        let n = self.vertices;
        let m = self.edges.len();
        let random = match (&self.initial, seed) {
            (Some(InitialSpec::Random { random }), Some(s)) => Some(RandomInitial { seed: s, ..random.clone() }),
            (_, Some(s)) => Some(RandomInitial::with_seed(s)),
            (Some(InitialSpec::Random { random }), None) => Some(random.clone()),
            (Some(InitialSpec::Explicit { x, xc }), None) => {
                return (NetworkState::new(x.clone(), xc.clone().unwrap_or_else(|| vec![0.0; m])), None);
            }
            (None, None) => None,
        };
        match random {
            Some(r) => (random_state(n, m, &r), Some(r.seed)),
            None => (NetworkState::zeros(n, m), None),
        }
    }
}

/// Uniform draw from a ChaCha8 stream seeded with `r.seed`; x first, then x_c.
pub fn random_state(n: usize, m: usize, r: &RandomInitial) -> NetworkState {
    let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
    let mut draw = |range: [f64; 2]| if range[0] == range[1] { range[0] } else { rng.random_range(range[0]..range[1]) };
    let x = (0..n).map(|_| draw(r.x_range)).collect();
    let xc = (0..m).map(|_| draw(r.xc_range)).collect();
    NetworkState::new(x, xc)
}
