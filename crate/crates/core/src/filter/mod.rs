//! Invariant EKFs: the offset-aware filter and the contact-aided baseline
//! that assumes the IMU and measurement frames coincide.

mod baseline;
mod proposed;

pub use baseline::{BaselineState, FootInit};
pub use proposed::FilterState;

use crate::lie::{Matrix15, Rotation3};
use crate::models::{Leg, LegKinematics, ModelError, NoiseConfig, SensorFrame, GRAVITY};
use nalgebra::{Matrix3, SMatrix, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Innovation covariances with a condition number above this are refused.
pub const MAX_INNOVATION_CONDITION: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("non-finite IMU sample at t = {t}")]
    NonFiniteImu { t: f64 },
    #[error("propagation step must be positive, got dt = {dt}")]
    NonPositiveStep { dt: f64 },
    #[error("frame at t = {t} is older than filter time {filter_t}")]
    NonMonotoneTime { t: f64, filter_t: f64 },
    #[error("innovation covariance is numerically singular (condition {condition:.3e})")]
    SingularInnovation { condition: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasurementKind {
    /// Velocity from joint angles and rates through forward kinematics.
    Fk,
    /// Directly measured foot position and velocity.
    Vec3,
}

impl std::str::FromStr for MeasurementKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fk" => Ok(Self::Fk),
            "vec3" | "3d" => Ok(Self::Vec3),
            other => Err(format!("unknown measurement kind `{other}` (expected fk or vec3)")),
        }
    }
}

impl std::fmt::Display for MeasurementKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Fk => "fk",
            Self::Vec3 => "vec3",
        })
    }
}

/// Initial standard deviations per tangent block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialCovariance {
    pub rot: f64,
    pub vel: f64,
    pub pos: f64,
    pub offset_rot: f64,
    pub offset_pos: f64,
}

impl Default for InitialCovariance {
    fn default() -> Self {
        Self { rot: 0.1, vel: 1.0, pos: 1.0, offset_rot: 0.1, offset_pos: 0.1 }
    }
}

impl InitialCovariance {
    pub fn matrix(&self) -> Matrix15 {
        let sds = [self.rot, self.vel, self.pos, self.offset_rot, self.offset_pos];
        Matrix15::from_fn(|i, j| if i == j { sds[i / 3].powi(2) } else { 0.0 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub measurement: MeasurementKind,
    pub noise: NoiseConfig,
    pub gravity: Vector3<f64>,
    pub initial_covariance: InitialCovariance,
    pub foot_init: FootInit,
    pub legs: LegKinematics,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            measurement: MeasurementKind::Fk,
            noise: NoiseConfig::default(),
            gravity: GRAVITY,
            initial_covariance: InitialCovariance::default(),
            foot_init: FootInit::default(),
            legs: LegKinematics::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateInfo {
    pub leg: Leg,
    pub innovation: Vector3<f64>,
    /// False when the innovation covariance was singular and the update was skipped.
    pub applied: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    pub propagated: bool,
    pub updates: [Option<UpdateInfo>; 2],
}

impl StepReport {
    pub fn applied_updates(&self) -> usize {
        self.updates.iter().flatten().filter(|u| u.applied).count()
    }
}

/// Common surface of both filters, used by the harness.
pub trait Estimator: Sized + Clone + Send + Sync {
    fn step(&self, frame: &SensorFrame, cfg: &FilterConfig) -> Result<(Self, StepReport), FilterError>;
    fn rotation(&self) -> Rotation3;
    fn velocity(&self) -> Vector3<f64>;
    fn position(&self) -> Vector3<f64>;
    fn covariance(&self) -> &Matrix15;
    fn time(&self) -> f64;
}

pub(crate) fn symmetrize(p: &Matrix15) -> Matrix15 {
    (p + p.transpose()) * 0.5
}

/// Kalman gain, tangent correction and Joseph-form covariance for a
/// three-row measurement.
pub(crate) fn kalman_correction(
    p: &Matrix15,
    h: &SMatrix<f64, 3, 15>,
    n: &Matrix3<f64>,
    innovation: &Vector3<f64>,
) -> Result<(SMatrix<f64, 15, 1>, Matrix15), FilterError> {
    let s = h * p * h.transpose() + n;
    let sv = s.singular_values();
    let condition = sv.max() / sv.min();
    if !(condition.is_finite() && condition <= MAX_INNOVATION_CONDITION) {
        return Err(FilterError::SingularInnovation { condition });
    }
    let s_inv = s.try_inverse().ok_or(FilterError::SingularInnovation { condition })?;
    let k = p * h.transpose() * s_inv;
    let i_kh = Matrix15::identity() - k * h;
    let p_new = i_kh * p * i_kh.transpose() + k * n * k.transpose();
    Ok((k * innovation, symmetrize(&p_new)))
}
