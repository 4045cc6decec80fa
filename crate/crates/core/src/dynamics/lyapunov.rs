use super::hamiltonian::Hamiltonian;
use super::system::{Control, NetworkState, NetworkSystem};
use crate::constraint::{solve_matching, ConstrainedNetwork, FlowConstraint};

/// `V(x, x_c) = 𝟙ᵀ S(−Bᵀ∇H(x) − x_c; u⁻, u⁺) + H(x)` where `S` is the
/// componentwise antiderivative of the saturation.
pub fn lyapunov_sat(net: &ConstrainedNetwork, hamiltonian: &Hamiltonian, state: &NetworkState) -> f64 {
    let grad = hamiltonian.gradient(&state.x);
    let y = net.graph.apply_incidence_transpose(&grad);
    let sat_part: f64 = y
        .iter()
        .zip(&state.xc)
        .zip(&net.constraints)
        .map(|((yj, xcj), c)| c.antiderivative(-yj - xcj))
        .sum();
    sat_part + hamiltonian.value(&state.x)
}

/// `V_d̄ = H(x) + H_c(x_c) − ∇H_c(x̄_c)ᵀ(x_c − x̄_c) − H_c(x̄_c)` for the
/// quadratic controller energy `H_c = ½ Σ kⱼ x_cⱼ²`, which reduces to
/// `H(x) + ½ Σ kⱼ (x_cⱼ − x̄_cⱼ)²`.
pub fn lyapunov_unconstrained(
    hamiltonian: &Hamiltonian,
    controller_weights: &[f64],
    state: &NetworkState,
    xbar_c: &[f64],
) -> f64 {
    let hc: f64 = state
        .xc
        .iter()
        .zip(xbar_c)
        .zip(controller_weights)
        .map(|((x, xb), k)| 0.5 * k * (x - xb).powi(2))
        .sum();
    hamiltonian.value(&state.x) + hc
}

/// The storage function evaluated along a simulation of `system`.
///
/// With in/outflow the saturated function is taken on the absorbed network
/// with `x̃_c = x_c − x̄_c`; the unconstrained one uses the matching `x̄_c`.
/// Without a matching the plain total energy is used.
pub(crate) struct LyapunovEvaluator {
    kind: Kind,
}

enum Kind {
    Saturated { net: ConstrainedNetwork, xbar: Vec<f64> },
    Unconstrained { weights: Vec<f64>, xbar: Vec<f64> },
}

impl LyapunovEvaluator {
    pub fn new(system: &NetworkSystem) -> Self {
        let m = system.edge_count();
        let xbar = solve_matching(&system.graph, &system.terminals, &system.disturbance)
            .ok()
            .and_then(|r| r.xbar_c)
            .unwrap_or_else(|| vec![0.0; m]);
        let kind = match &system.control {
            Control::Saturated { constraints } => {
                let shifted = constraints
                    .iter()
                    .zip(&xbar)
                    .map(|(c, s)| c.shifted(*s))
                    .collect::<Result<Vec<FlowConstraint>, _>>()
                    .unwrap_or_else(|_| constraints.clone());
                Kind::Saturated {
                    net: ConstrainedNetwork { graph: system.graph.clone(), constraints: shifted },
                    xbar,
                }
            }
            Control::Unconstrained { controller_weights, .. } => {
                let xbar = xbar.iter().zip(controller_weights).map(|(w, k)| w / k).collect();
                Kind::Unconstrained { weights: controller_weights.clone(), xbar }
            }
        };
        Self { kind }
    }

    pub fn eval(&self, hamiltonian: &Hamiltonian, state: &NetworkState) -> f64 {
        match &self.kind {
            Kind::Saturated { net, xbar } => {
                let shifted = NetworkState {
                    x: state.x.clone(),
                    xc: state.xc.iter().zip(xbar).map(|(a, b)| a - b).collect(),
                };
                lyapunov_sat(net, hamiltonian, &shifted)
            }
            Kind::Unconstrained { weights, xbar } => lyapunov_unconstrained(hamiltonian, weights, state, xbar),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn shared_edge(intervals: [(f64, f64); 5]) -> ConstrainedNetwork {
        let ends = [(0, 1), (1, 2), (2, 0), (0, 3), (3, 2)];
        let records: Vec<_> = ends
            .iter()
            .zip(intervals)
            .map(|(&(t, h), (lo, hi))| (t, h, lo, hi))
            .collect();
        ConstrainedNetwork::from_records(4, &records).unwrap()
    }

    #[test]
    fn reduces_to_storage_energy_when_argument_vanishes() {
        let net = shared_edge([(0.3, 1.0); 5]);
        let h = Hamiltonian::identity(4);
        let x = vec![1.0, -2.0, 0.5, 3.0];
        // choose x_c = −Bᵀx so the saturation argument is zero
        let xc: Vec<f64> = net.graph.apply_incidence_transpose(&x).iter().map(|v| -v).collect();
        let v = lyapunov_sat(&net, &h, &NetworkState::new(x.clone(), xc));
        let half_norm = 0.5 * x.iter().map(|a| a * a).sum::<f64>();
        assert!((v - half_norm).abs() < 1e-14);
    }

    #[test]
    fn unconstrained_quadratic_form() {
        let h = Hamiltonian::identity(2);
        let s = NetworkState::new(vec![0.0, 0.0], vec![1.0]);
        assert_eq!(lyapunov_unconstrained(&h, &[1.0], &s, &[1.0]), 0.0);
        let s = NetworkState::new(vec![1.0, 2.0], vec![3.0]);
        assert_eq!(lyapunov_unconstrained(&h, &[1.0], &s, &[1.0]), 0.5 * 5.0 + 0.5 * 4.0);
    }

    #[test]
    fn can_be_negative_when_lower_bounds_are_positive() {
        // S(z) = lo·z < 0 for z < 0 whenever lo > 0
        let net = ConstrainedNetwork::from_records(2, &[(0, 1, 1.0, 2.0)]).unwrap();
        let v = lyapunov_sat(&net, &Hamiltonian::identity(2), &NetworkState::new(vec![0.0, 0.0], vec![10.0]));
        assert_eq!(v, -10.0);
    }

    proptest! {
        #[test]
        fn nonnegative_when_intervals_contain_zero(
            x in proptest::collection::vec(-5.0f64..5.0, 4),
            xc in proptest::collection::vec(-5.0f64..5.0, 5),
            lo in proptest::collection::vec(-2.0f64..=0.0, 5),
            hi in proptest::collection::vec(0.1f64..2.0, 5),
        ) {
            let mut iv = [(0.0, 0.0); 5];
            for k in 0..5 { iv[k] = (lo[k], hi[k]); }
            let net = shared_edge(iv);
            let v = lyapunov_sat(&net, &Hamiltonian::identity(4), &NetworkState::new(x, xc));
            prop_assert!(v >= 0.0);
        }
    }
}
