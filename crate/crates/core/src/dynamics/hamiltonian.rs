use std::fmt;
use std::sync::Arc;

type VertexFn = dyn Fn(usize, f64) -> f64 + Send + Sync;

/// Separable storage Hamiltonian `H(x) = Σᵢ Hᵢ(xᵢ)` with strictly
/// increasing per-vertex gradients.
#[derive(Clone)]
pub enum Hamiltonian {
    /// `Hᵢ(xᵢ) = ½ cᵢ xᵢ²`, `cᵢ > 0`.
    Quadratic { weights: Vec<f64> },
    Custom(Arc<CustomHamiltonian>),
}

pub struct CustomHamiltonian {
    name: String,
    n: usize,
    value: Box<VertexFn>,
    gradient: Box<VertexFn>,
}

impl fmt::Debug for Hamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hamiltonian::Quadratic { weights } => f.debug_struct("Quadratic").field("weights", weights).finish(),
            Hamiltonian::Custom(c) => f.debug_struct("Custom").field("name", &c.name).field("n", &c.n).finish(),
        }
    }
}

/// Built-in non-quadratic vertex energies.
pub const NAMED_HAMILTONIANS: &[&str] = &["quartic", "cosh"];

impl Hamiltonian {
    pub fn identity(n: usize) -> Self {
        Hamiltonian::Quadratic { weights: vec![1.0; n] }
    }

    pub fn quadratic(weights: Vec<f64>) -> Option<Self> {
        weights
            .iter()
            .all(|w| w.is_finite() && *w > 0.0)
            .then_some(Hamiltonian::Quadratic { weights })
    }

    /// User-supplied separable energy. The gradient must be strictly
    /// increasing in `x` for every vertex; this is not checked.
    pub fn custom<V, G>(name: impl Into<String>, n: usize, value: V, gradient: G) -> Self
    where
        V: Fn(usize, f64) -> f64 + Send + Sync + 'static,
        G: Fn(usize, f64) -> f64 + Send + Sync + 'static,
    {
        Hamiltonian::Custom(Arc::new(CustomHamiltonian {
            name: name.into(),
            n,
            value: Box::new(value),
            gradient: Box::new(gradient),
        }))
    }

    /// `quartic`: `½x² + ¼x⁴`; `cosh`: `cosh(x) − 1`.
    pub fn named(name: &str, n: usize) -> Option<Self> {
        match name {
            "quartic" => Some(Self::custom(
                "quartic",
                n,
                |_, x| 0.5 * x * x + 0.25 * x.powi(4),
                |_, x| x + x.powi(3),
            )),
            "cosh" => Some(Self::custom("cosh", n, |_, x| x.cosh() - 1.0, |_, x| x.sinh())),
            _ => None,
        }
    }

    pub fn vertex_count(&self) -> usize {
        match self {
            Hamiltonian::Quadratic { weights } => weights.len(),
            Hamiltonian::Custom(c) => c.n,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Hamiltonian::Quadratic { .. } => "quadratic",
            Hamiltonian::Custom(c) => &c.name,
        }
    }

    /// `H = ½‖x‖²`.
    pub fn is_identity_quadratic(&self) -> bool {
        matches!(self, Hamiltonian::Quadratic { weights } if weights.iter().all(|&w| w == 1.0))
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Hamiltonian::Quadratic { weights } => {
                weights.iter().zip(x).map(|(c, xi)| 0.5 * c * xi * xi).sum()
            }
            Hamiltonian::Custom(c) => x.iter().enumerate().map(|(i, &xi)| (c.value)(i, xi)).sum(),
        }
    }

    pub fn vertex_gradient(&self, vertex: usize, x: f64) -> f64 {
        match self {
            Hamiltonian::Quadratic { weights } => weights[vertex] * x,
            Hamiltonian::Custom(c) => (c.gradient)(vertex, x),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.gradient_into(x, &mut out);
        out
    }

    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Hamiltonian::Quadratic { weights } => {
                for ((o, c), xi) in out.iter_mut().zip(weights).zip(x) {
                    *o = c * xi;
                }
            }
            Hamiltonian::Custom(c) => {
                for (i, (o, &xi)) in out.iter_mut().zip(x).enumerate() {
                    *o = (c.gradient)(i, xi);
                }
            }
        }
    }

    /// Storage level `xᵢ` with `∂Hᵢ/∂xᵢ(xᵢ) = α`, by bisection.
    pub fn gradient_inverse(&self, vertex: usize, alpha: f64) -> Option<f64> {
        if let Hamiltonian::Quadratic { weights } = self {
            return Some(alpha / weights[vertex]);
        }
        let g = |x: f64| self.vertex_gradient(vertex, x) - alpha;
        let (mut lo, mut hi) = (-1.0, 1.0);
        let mut expansions = 0;
        while g(lo) > 0.0 || g(hi) < 0.0 {
            lo *= 2.0;
            hi *= 2.0;
            expansions += 1;
            if expansions > 200 {
                return None;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * (1.0 + mid.abs()) {
                break;
            }
        }
        Some(0.5 * (lo + hi))
    }

    /// Per-vertex levels at which every gradient equals `alpha`.
    pub fn consensus_state(&self, alpha: f64) -> Option<Vec<f64>> {
        (0..self.vertex_count()).map(|v| self.gradient_inverse(v, alpha)).collect()
    }

    /// Consensus value `α` whose consensus state stores `total` in all.
    pub fn consensus_level(&self, total: f64) -> Option<f64> {
        let stored = |alpha: f64| -> Option<f64> { Some(self.consensus_state(alpha)?.iter().sum()) };
        let (mut lo, mut hi) = (-1.0, 1.0);
        let mut expansions = 0;
        while stored(lo)? > total || stored(hi)? < total {
            lo *= 2.0;
            hi *= 2.0;
            expansions += 1;
            if expansions > 200 {
                return None;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if stored(mid)? < total {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 * (1.0 + mid.abs()) {
                break;
            }
        }
        Some(0.5 * (lo + hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_value_and_gradient() {
        let h = Hamiltonian::quadratic(vec![1.0, 2.0]).unwrap();
        assert_eq!(h.value(&[2.0, 1.0]), 3.0);
        assert_eq!(h.gradient(&[2.0, 1.0]), vec![2.0, 2.0]);
        assert!(Hamiltonian::quadratic(vec![1.0, 0.0]).is_none());
        assert!(Hamiltonian::identity(3).is_identity_quadratic());
        assert!(!h.is_identity_quadratic());
    }

    #[test]
    fn named_gradients_match_finite_differences() {
        for name in NAMED_HAMILTONIANS {
            let h = Hamiltonian::named(name, 1).unwrap();
            for x in [-1.5, -0.2, 0.0, 0.7, 2.0] {
                let eps = 1e-6;
                let fd = (h.value(&[x + eps]) - h.value(&[x - eps])) / (2.0 * eps);
                assert!((fd - h.vertex_gradient(0, x)).abs() < 1e-6, "{name} at {x}");
            }
        }
        assert!(Hamiltonian::named("bogus", 2).is_none());
    }

    #[test]
    fn inverse_gradient_by_bisection() {
        let h = Hamiltonian::named("quartic", 2).unwrap();
        let x = h.gradient_inverse(0, 10.0).unwrap();
        // x + x³ = 10 has the root x = 2
        assert!((x - 2.0).abs() < 1e-12);
        let alpha = h.consensus_level(4.0).unwrap();
        let levels = h.consensus_state(alpha).unwrap();
        assert!((levels.iter().sum::<f64>() - 4.0).abs() < 1e-10);
        assert!((levels[0] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn bounded_gradient_has_no_inverse_out_of_range() {
        let h = Hamiltonian::custom("logcosh", 1, |_, x: f64| x.cosh().ln(), |_, x: f64| x.tanh());
        assert!(h.gradient_inverse(0, 0.5).is_some());
        assert!(h.gradient_inverse(0, 2.0).is_none());
    }
}
