use serde::{Deserialize, Serialize};

use super::simulate::Trajectory;

/// Thresholds for reading an outcome off a finished trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyTolerances {
    /// Largest ∇H spread counted as consensus.
    pub consensus_spread: f64,
    /// `‖ẋ‖∞` below which the storage counts as settled.
    pub settle_rate: f64,
    /// `‖x‖ > factor · (1 + ‖x(0)‖)` is divergence outright.
    pub divergence_factor: f64,
    /// Smallest fitted growth rate of `‖x(t)‖` counted as linear growth.
    pub growth_rate: f64,
    /// Fraction of the horizon examined at the end of the run.
    pub trailing_fraction: f64,
}

impl Default for ClassifyTolerances {
    fn default() -> Self {
        Self {
            consensus_spread: 1e-3,
            settle_rate: 1e-5,
            divergence_factor: 1e3,
            growth_rate: 1e-3,
            trailing_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classification {
    Consensus { alpha: f64 },
    /// Distinct limit values of ∇H, ascending, and each vertex's group.
    Clustering { values: Vec<f64>, labels: Vec<usize> },
    Divergent { rate: f64 },
    Undecided { reason: String },
}

impl Classification {
    pub fn label(&self) -> &'static str {
        match self {
            Classification::Consensus { .. } => "Consensus",
            Classification::Clustering { .. } => "Clustering",
            Classification::Divergent { .. } => "Divergent",
            Classification::Undecided { .. } => "Undecided",
        }
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, a| m.max(a.abs()))
}

fn spread(v: &[f64]) -> f64 {
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &a| (lo.min(a), hi.max(a)));
    if v.is_empty() { 0.0 } else { hi - lo }
}

/// Least-squares slope and coefficient of determination.
fn linear_fit(t: &[f64], y: &[f64]) -> (f64, f64) {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let stt: f64 = t.iter().map(|a| (a - tm).powi(2)).sum();
    let sty: f64 = t.iter().zip(y).map(|(a, b)| (a - tm) * (b - ym)).sum();
    let syy: f64 = y.iter().map(|b| (b - ym).powi(2)).sum();
    if stt == 0.0 {
        return (0.0, 0.0);
    }
    let slope = sty / stt;
    let r2 = if syy == 0.0 { 1.0 } else { sty * sty / (stt * syy) };
    (slope, r2)
}

/// Group sorted values separated by gaps larger than `gap`.
fn clusters(values: &[f64], gap: f64) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut labels = vec![0; values.len()];
    let mut groups: Vec<Vec<f64>> = Vec::new();
    for (k, &i) in order.iter().enumerate() {
        if k == 0 || values[i] - values[order[k - 1]] > gap {
            groups.push(Vec::new());
        }
        groups.last_mut().unwrap().push(values[i]);
        labels[i] = groups.len() - 1;
    }
    let means = groups.iter().map(|g| g.iter().sum::<f64>() / g.len() as f64).collect();
    (means, labels)
}

/// Whether every flow held at a bound is being driven further past it, so
/// that the frozen flow pattern persists. Uses the last three samples; a
/// trajectory without drive samples passes.
fn saturation_deepens(traj: &Trajectory) -> bool {
    let k = traj.drive.len();
    if k < 3 || k != traj.len() {
        return true;
    }
    let (t0, t1, t2) = (traj.times[k - 3], traj.times[k - 2], traj.times[k - 1]);
    let (z0, z1, z2) = (&traj.drive[k - 3], &traj.drive[k - 2], &traj.drive[k - 1]);
    let u = &traj.u[k - 1];
    (0..u.len()).all(|j| {
        let excess = z2[j] - u[j];
        if excess.abs() <= 1e-9 * (1.0 + u[j].abs()) {
            return true;
        }
        let v1 = (z1[j] - z0[j]) / (t1 - t0);
        let v2 = (z2[j] - z1[j]) / (t2 - t1);
        let accel = (v2 - v1) / (0.5 * (t2 - t0));
        excess.signum() * v2 > 0.0 && excess.signum() * accel >= -1e-9
    })
}

/// Read consensus, clustering or divergence off the tail of a trajectory.
///
/// * Divergent: `‖x‖` blew past the divergence factor while growing, or it
///   grows linearly over the trailing window with `ẋ` frozen at a nonzero
///   value and every saturated flow driven deeper into its bound.
/// * Consensus: settled with ∇H spread below `consensus_spread`.
/// * Clustering: settled with a stable nonzero spread while every component
///   of `ẋ_c` keeps one sign (flows pinned at their bounds).
pub fn classify_trajectory(traj: &Trajectory, tol: &ClassifyTolerances) -> Classification {
    let undecided = |reason: &str| Classification::Undecided { reason: reason.to_string() };
    if traj.len() < 3 {
        return undecided("trajectory too short");
    }
    let t_end = *traj.times.last().unwrap();
    let t_start = t_end * (1.0 - tol.trailing_fraction);
    let first = traj.times.iter().position(|&t| t >= t_start).unwrap_or(0).min(traj.len() - 3);
    let window = first..traj.len();

    let norms: Vec<f64> = traj.x[window.clone()].iter().map(|x| norm2(x)).collect();
    let times = &traj.times[window.clone()];
    let (slope, r2) = linear_fit(times, &norms);
    let x0_norm = norm2(&traj.x[0]);
    let peak = traj.x.iter().map(|x| norm2(x)).fold(0.0, f64::max);

    let rate_start = norm_inf(&traj.rate_x[first]);
    let rate_end = norm_inf(traj.rate_x.last().unwrap());

    if peak > tol.divergence_factor * (1.0 + x0_norm) && slope > 0.0 {
        return Classification::Divergent { rate: slope };
    }
    // linear growth means the flow pattern has frozen, so ẋ is constant
    let rate_last = traj.rate_x.last().unwrap();
    let rate_drift = traj.rate_x[window.clone()]
        .iter()
        .map(|r| r.iter().zip(rate_last).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
        .fold(0.0, f64::max);
    if slope > tol.growth_rate
        && r2 > 0.99
        && rate_end > tol.growth_rate
        && rate_end >= 0.5 * rate_start
        && rate_drift <= 1e-2 * rate_end
        && saturation_deepens(traj)
    {
        return Classification::Divergent { rate: slope };
    }
    if rate_end > tol.settle_rate {
        return undecided("storage has not settled");
    }

    let grad_end = traj.grad.last().unwrap();
    let spread_end = spread(grad_end);
    if spread_end < tol.consensus_spread {
        let alpha = grad_end.iter().sum::<f64>() / grad_end.len() as f64;
        return Classification::Consensus { alpha };
    }

    let spread_start = spread(&traj.grad[first]);
    if (spread_end - spread_start).abs() > tol.consensus_spread * (1.0 + spread_end) {
        return undecided("gradient spread still changing");
    }
    let deadband = 0.1 * tol.consensus_spread;
    let m = traj.rate_xc[first].len();
    for j in 0..m {
        let mut sign = 0.0;
        for r in &traj.rate_xc[window.clone()] {
            if r[j].abs() <= deadband {
                continue;
            }
            if sign != 0.0 && r[j].signum() != sign {
                return undecided("controller drift changes sign");
            }
            sign = r[j].signum();
        }
    }
    let (values, labels) = clusters(grad_end, tol.consensus_spread);
    Classification::Clustering { values, labels }
}
