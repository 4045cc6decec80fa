use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::lyapunov::LyapunovEvaluator;
use super::system::{NetworkState, NetworkSystem, SystemError, Workspace};

/// Fixed-step RK4 settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub horizon: f64,
    pub step: f64,
    /// Spacing of recorded samples; rounded to a whole number of steps.
    pub sample_interval: f64,
    /// Retry a step with halved substeps while the storage balance check
    /// fails, down to `min_step`.
    pub adaptive: bool,
    pub min_step: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            horizon: 200.0,
            step: 1e-3,
            sample_interval: 0.1,
            adaptive: true,
            min_step: 1e-9,
        }
    }
}

impl SimOptions {
    pub fn with_horizon(horizon: f64) -> Self {
        Self { horizon, ..Self::default() }
    }
}

/// Absolute storage balance tolerance `1e-6 (1 + t)`.
pub fn conservation_tolerance(t: f64) -> f64 {
    1e-6 * (1.0 + t)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Largest `V(t_{k+1}) − V(t_k)` over all integration steps.
    pub max_lyapunov_increase: f64,
    /// Largest `|𝟙ᵀx(t) − 𝟙ᵀx(0) − t 𝟙ᵀE d̄|` over all steps.
    pub max_conservation_residual: f64,
    /// `𝟙ᵀ E d̄`.
    pub net_inflow: f64,
    pub steps: usize,
    pub halved_steps: usize,
}

/// Sampled solution. Row `k` of every per-sample vector belongs to
/// `times[k]`; `rate_x`/`rate_xc` hold the vector field at the sample.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub xc: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    /// Controller output before saturation.
    pub drive: Vec<Vec<f64>>,
    pub grad: Vec<Vec<f64>>,
    pub rate_x: Vec<Vec<f64>>,
    pub rate_xc: Vec<Vec<f64>>,
    pub lyapunov: Vec<f64>,
    pub total_storage: Vec<f64>,
    pub diagnostics: Diagnostics,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> Option<NetworkState> {
        Some(NetworkState::new(self.x.last()?.clone(), self.xc.last()?.clone()))
    }

    /// Largest storage difference `sup_t ‖x(t) − other(t)‖∞` over common
    /// sample times.
    pub fn max_storage_deviation(&self, other: &Trajectory) -> f64 {
        self.x
            .iter()
            .zip(&other.x)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(p, q)| (p - q).abs()))
            .fold(0.0, f64::max)
    }

    /// CSV with header `t,x_0..,xc_0..,u_0..,V,sum_x`. A leading `# seed=`
    /// comment line is written when `seed` is given.
    pub fn write_csv<W: Write>(&self, mut w: W, seed: Option<u64>) -> io::Result<()> {
        if let Some(seed) = seed {
            writeln!(w, "# seed={seed}")?;
        }
        let n = self.x.first().map_or(0, Vec::len);
        let m = self.xc.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((0..n).map(|i| format!("x_{i}")));
        header.extend((0..m).map(|j| format!("xc_{j}")));
        header.extend((0..m).map(|j| format!("u_{j}")));
        header.push("V".into());
        header.push("sum_x".into());
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.len() {
            let mut row = String::new();
            row.push_str(&self.times[k].to_string());
            for v in self.x[k].iter().chain(&self.xc[k]).chain(&self.u[k]) {
                row.push(',');
                row.push_str(&v.to_string());
            }
            row.push(',');
            row.push_str(&self.lyapunov[k].to_string());
            row.push(',');
            row.push_str(&self.total_storage[k].to_string());
            writeln!(w, "{row}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimErrorKind {
    #[error("step size fell below {min_step} at t = {t}")]
    StepUnderflow { t: f64, min_step: f64 },
    #[error("state became non-finite at t = {t}")]
    NonFinite { t: f64 },
}

/// Integration failure, carrying every sample recorded before it.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind}")]
pub struct IntegrationError {
    pub kind: SimErrorKind,
    pub partial: Box<Trajectory>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("horizon and step must be positive and finite")]
    BadOptions,
    #[error(transparent)]
    Dimension(#[from] SystemError),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
}

struct Integrator<'a> {
    system: &'a NetworkSystem,
    ws: Workspace,
    // RK4 stages and a scratch state
    k: [(Vec<f64>, Vec<f64>); 4],
    tmp: (Vec<f64>, Vec<f64>),
}

impl<'a> Integrator<'a> {
    fn new(system: &'a NetworkSystem) -> Self {
        let n = system.vertex_count();
        let m = system.edge_count();
        let stage = || (vec![0.0; n], vec![0.0; m]);
        Self {
            system,
            ws: system.workspace(),
            k: [stage(), stage(), stage(), stage()],
            tmp: stage(),
        }
    }

    fn rk4(&mut self, x: &mut [f64], xc: &mut [f64], h: f64) {
        let sys = self.system;
        let [k1, k2, k3, k4] = &mut self.k;
        let (tx, txc) = &mut self.tmp;
        sys.eval_into(x, xc, &mut k1.0, &mut k1.1, &mut self.ws);
        axpy(tx, x, &k1.0, 0.5 * h);
        axpy(txc, xc, &k1.1, 0.5 * h);
        sys.eval_into(tx, txc, &mut k2.0, &mut k2.1, &mut self.ws);
        axpy(tx, x, &k2.0, 0.5 * h);
        axpy(txc, xc, &k2.1, 0.5 * h);
        sys.eval_into(tx, txc, &mut k3.0, &mut k3.1, &mut self.ws);
        axpy(tx, x, &k3.0, h);
        axpy(txc, xc, &k3.1, h);
        sys.eval_into(tx, txc, &mut k4.0, &mut k4.1, &mut self.ws);
        for i in 0..x.len() {
            x[i] += h / 6.0 * (k1.0[i] + 2.0 * k2.0[i] + 2.0 * k3.0[i] + k4.0[i]);
        }
        for j in 0..xc.len() {
            xc[j] += h / 6.0 * (k1.1[j] + 2.0 * k2.1[j] + 2.0 * k3.1[j] + k4.1[j]);
        }
    }
}

fn axpy(out: &mut [f64], base: &[f64], dir: &[f64], scale: f64) {
    for ((o, b), d) in out.iter_mut().zip(base).zip(dir) {
        *o = b + scale * d;
    }
}

fn record(traj: &mut Trajectory, system: &NetworkSystem, lyap: &LyapunovEvaluator, t: f64, state: &NetworkState, v: f64) {
    let rate = system.rhs(state);
    traj.times.push(t);
    traj.x.push(state.x.clone());
    traj.xc.push(state.xc.clone());
    traj.u.push(system.flows(state));
    traj.drive.push(system.controller_input(state));
    traj.grad.push(system.hamiltonian.gradient(&state.x));
    traj.rate_x.push(rate.x);
    traj.rate_xc.push(rate.xc);
    traj.lyapunov.push(if v.is_nan() { lyap.eval(&system.hamiltonian, state) } else { v });
    traj.total_storage.push(state.x.iter().sum());
}

/// Integrate the closed loop of `system` from `state0` with fixed-step RK4.
pub fn simulate(system: &NetworkSystem, state0: &NetworkState, options: &SimOptions) -> Result<Trajectory, SimError> {
    let valid = |v: f64| v.is_finite() && v > 0.0;
    if !(valid(options.horizon) && valid(options.step) && valid(options.sample_interval)) {
        return Err(SimError::BadOptions);
    }
    system.check_state(state0)?;

    let h = options.step;
    let steps = (options.horizon / h).round().max(1.0) as usize;
    let every = ((options.sample_interval / h).round() as usize).max(1);
    let lyap = LyapunovEvaluator::new(system);
    let net_inflow = system.net_inflow();
    let initial_total: f64 = state0.x.iter().sum();

    let mut traj = Trajectory {
        diagnostics: Diagnostics { net_inflow, ..Default::default() },
        ..Default::default()
    };
    let mut integrator = Integrator::new(system);
    let mut state = state0.clone();
    let mut v_prev = lyap.eval(&system.hamiltonian, &state);
    record(&mut traj, system, &lyap, 0.0, &state, v_prev);

    let mut trial = state.clone();
    for step in 1..=steps {
        let t = step as f64 * h;
        let mut substeps = 1usize;
        loop {
            trial.x.copy_from_slice(&state.x);
            trial.xc.copy_from_slice(&state.xc);
            let sub_h = h / substeps as f64;
            for _ in 0..substeps {
                integrator.rk4(&mut trial.x, &mut trial.xc, sub_h);
            }
            if trial.x.iter().chain(&trial.xc).any(|v| !v.is_finite()) {
                return Err(IntegrationError {
                    kind: SimErrorKind::NonFinite { t },
                    partial: Box::new(traj),
                }
                .into());
            }
            let residual = (trial.x.iter().sum::<f64>() - initial_total - t * net_inflow).abs();
            if residual <= conservation_tolerance(t) || !options.adaptive {
                traj.diagnostics.max_conservation_residual =
                    traj.diagnostics.max_conservation_residual.max(residual);
                break;
            }
            substeps *= 2;
            if h / (substeps as f64) < options.min_step {
                return Err(IntegrationError {
                    kind: SimErrorKind::StepUnderflow { t, min_step: options.min_step },
                    partial: Box::new(traj),
                }
                .into());
            }
            traj.diagnostics.halved_steps += 1;
        }
        std::mem::swap(&mut state, &mut trial);
        traj.diagnostics.steps += 1;

        let v = lyap.eval(&system.hamiltonian, &state);
        traj.diagnostics.max_lyapunov_increase = traj.diagnostics.max_lyapunov_increase.max(v - v_prev);
        v_prev = v;

        if step % every == 0 || step == steps {
            record(&mut traj, system, &lyap, t, &state, v);
        }
    }
    Ok(traj)
}
