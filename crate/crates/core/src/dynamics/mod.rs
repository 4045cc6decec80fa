mod classify;
mod hamiltonian;
mod lyapunov;
mod simulate;
mod system;

pub use classify::{classify_trajectory, Classification, ClassifyTolerances};
pub use hamiltonian::{CustomHamiltonian, Hamiltonian, NAMED_HAMILTONIANS};
pub use lyapunov::{lyapunov_sat, lyapunov_unconstrained};
pub use simulate::{
    conservation_tolerance, simulate, Diagnostics, IntegrationError, SimError, SimErrorKind, SimOptions, Trajectory,
};
pub use system::{rhs_constrained, rhs_unconstrained, Control, NetworkState, NetworkSystem, StateDerivative, SystemError};
