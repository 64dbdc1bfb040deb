use super::{Convergence, FilterKind, HarnessError};
use crate::filter::MeasurementKind;
use crate::lie::Rotation3;
use nalgebra::Vector3;
use std::f64::consts::PI;

/// ZYX Euler angle of the orientation error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EulerAxis {
    Roll,
    Pitch,
    Yaw,
}

/// Estimate-minus-truth at one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickError {
    pub t: f64,
    pub velocity: Vector3<f64>,
    /// Roll, pitch and yaw differences in rad, wrapped to (-pi, pi].
    pub euler: Vector3<f64>,
}

fn wrap(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

impl TickError {
    pub fn new(t: f64, est_r: &Rotation3, est_v: &Vector3<f64>, true_r: &Rotation3, true_v: &Vector3<f64>) -> Self {
        let (er, ep, ey) = est_r.euler_zyx();
        let (tr, tp, ty) = true_r.euler_zyx();
        Self { t, velocity: est_v - true_v, euler: Vector3::new(wrap(er - tr), wrap(ep - tp), wrap(ey - ty)) }
    }
}

/// RMSE over all three velocity axes, m/s. `None` for an empty slice.
pub fn velocity_rmse(ticks: &[TickError]) -> Option<f64> {
    if ticks.is_empty() {
        return None;
    }
    let sum: f64 = ticks.iter().map(|e| e.velocity.norm_squared()).sum();
    Some((sum / (3 * ticks.len()) as f64).sqrt())
}

/// RMSE over the requested Euler axes, degrees. Yaw is refused.
pub fn orientation_rmse_deg(ticks: &[TickError], axes: &[EulerAxis]) -> Result<Option<f64>, HarnessError> {
    if axes.contains(&EulerAxis::Yaw) {
        return Err(HarnessError::YawInOrientation);
    }
    if ticks.is_empty() || axes.is_empty() {
        return Ok(None);
    }
    let idx = |a: &EulerAxis| match a {
        EulerAxis::Roll => 0,
        EulerAxis::Pitch => 1,
        EulerAxis::Yaw => unreachable!(),
    };
    let sum: f64 = ticks.iter().map(|e| axes.iter().map(|a| e.euler[idx(a)].powi(2)).sum::<f64>()).sum();
    Ok(Some((sum / (axes.len() * ticks.len()) as f64).sqrt().to_degrees()))
}

/// Seconds from `start` until the velocity-error norm first drops below the
/// threshold and stays there for the hold time.
pub fn convergence_time(ticks: &[TickError], start: f64, conv: &Convergence) -> Option<f64> {
    let mut entered: Option<f64> = None;
    for e in ticks.iter().filter(|e| e.t >= start) {
        if e.velocity.norm() < conv.threshold {
            let since = *entered.get_or_insert(e.t);
            if e.t - since >= conv.hold {
                return Some(since - start);
            }
        } else {
            entered = None;
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialMetrics {
    pub index: usize,
    pub v_rmse_initial: Option<f64>,
    pub v_rmse_steady: Option<f64>,
    pub o_rmse_initial: Option<f64>,
    pub o_rmse_steady: Option<f64>,
    /// Time of the first applied contact update.
    pub first_update: Option<f64>,
    /// Seconds after the first update; `None` if it never converged.
    pub convergence: Option<f64>,
    /// Error that stopped the trial early, if any.
    pub diverged: Option<String>,
    pub mean_loop_seconds: f64,
}

impl TrialMetrics {
    pub fn from_ticks(index: usize, ticks: &[TickError], initial_period: f64, first_update: Option<f64>, conv: &Convergence) -> Self {
        let split = ticks.partition_point(|e| e.t < initial_period);
        let (initial, steady) = ticks.split_at(split);
        let rp = [EulerAxis::Roll, EulerAxis::Pitch];
        Self {
            index,
            v_rmse_initial: velocity_rmse(initial),
            v_rmse_steady: velocity_rmse(steady),
            o_rmse_initial: orientation_rmse_deg(initial, &rp).expect("roll/pitch only"),
            o_rmse_steady: orientation_rmse_deg(steady, &rp).expect("roll/pitch only"),
            first_update,
            convergence: first_update.and_then(|t0| convergence_time(ticks, t0, conv)),
            diverged: None,
            mean_loop_seconds: 0.0,
        }
    }

    pub fn converged_within(&self, limit: f64) -> bool {
        self.diverged.is_none() && self.convergence.is_some_and(|c| c <= limit)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub filter: FilterKind,
    pub measurement: MeasurementKind,
    pub motion: Option<String>,
    pub trials: Vec<TrialMetrics>,
    /// Joint rates were reconstructed from angles.
    pub rates_filled: bool,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl MetricsReport {
    fn healthy(&self) -> impl Iterator<Item = &TrialMetrics> {
        self.trials.iter().filter(|t| t.diverged.is_none())
    }

    pub fn diverged(&self) -> usize {
        self.trials.iter().filter(|t| t.diverged.is_some()).count()
    }

    pub fn v_rmse_initial(&self) -> Option<f64> {
        mean(self.healthy().map(|t| t.v_rmse_initial))
    }

    pub fn v_rmse_steady(&self) -> Option<f64> {
        mean(self.healthy().map(|t| t.v_rmse_steady))
    }

    pub fn o_rmse_initial(&self) -> Option<f64> {
        mean(self.healthy().map(|t| t.o_rmse_initial))
    }

    pub fn o_rmse_steady(&self) -> Option<f64> {
        mean(self.healthy().map(|t| t.o_rmse_steady))
    }

    pub fn converged_within(&self, limit: f64) -> usize {
        self.trials.iter().filter(|t| t.converged_within(limit)).count()
    }

    pub fn mean_loop_seconds(&self) -> f64 {
        self.trials.iter().map(|t| t.mean_loop_seconds).sum::<f64>() / self.trials.len().max(1) as f64
    }

    /// One row per trial.
    pub fn trials_csv(&self) -> String {
        let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
        let mut out = String::from("trial,v_rmse_initial,v_rmse_steady,o_rmse_initial_deg,o_rmse_steady_deg,first_update,convergence,diverged\n");
        for t in &self.trials {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                t.index,
                opt(t.v_rmse_initial),
                opt(t.v_rmse_steady),
                opt(t.o_rmse_initial),
                opt(t.o_rmse_steady),
                opt(t.first_update),
                opt(t.convergence),
                t.diverged.as_deref().unwrap_or("").replace(',', ";")
            ));
        }
        out
    }
}
