//! Process and measurement models.

mod kinematics;
mod measurement;
mod noise;
mod process;

pub use kinematics::{FkJacobian, KinematicChain, LegKinematics};
pub use measurement::{
    assemble_measurement_3d, assemble_measurement_fk, measurement_jacobian, measurement_jacobian_3d, measurement_jacobian_fk, predicted_measurement,
    Measurement, MeasurementJacobian,
};
pub use noise::NoiseConfig;
pub use process::{process_derivative, process_jacobian, transition_matrix, ProcessInput, GRAVITY};

use nalgebra::Vector3;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("expected {expected} joint values, got {got}")]
    JointCount { expected: usize, got: usize },
    #[error("{leg} leg is not in contact; kinematic update must be skipped")]
    NoContact { leg: Leg },
    #[error("{leg} leg sample carries no 3-D marker vector")]
    MissingMarker { leg: Leg },
    #[error("invalid kinematic chain: {0}")]
    InvalidChain(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Leg {
    Left,
    Right,
}

impl Leg {
    pub const BOTH: [Leg; 2] = [Leg::Left, Leg::Right];

    pub fn index(self) -> usize {
        match self {
            Leg::Left => 0,
            Leg::Right => 1,
        }
    }
}

impl std::fmt::Display for Leg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Leg::Left => "left",
            Leg::Right => "right",
        })
    }
}

/// One IMU reading in the body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    pub t: f64,
    /// Specific force, m/s^2.
    pub accel: Vector3<f64>,
    /// Angular rate, rad/s.
    pub gyro: Vector3<f64>,
}

impl ImuSample {
    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.accel.iter().chain(self.gyro.iter()).all(|x| x.is_finite())
    }
}

/// Foot position/velocity relative to the measurement frame, measured
/// directly by motion capture rather than through the joint chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkerVector {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointSample {
    pub t: f64,
    pub leg: Leg,
    /// Measured joint angles, rad.
    pub angles: Vec<f64>,
    /// Measured joint rates, rad/s.
    pub rates: Vec<f64>,
    pub contact: bool,
    pub marker: Option<MarkerVector>,
}

/// Everything the filters consume at one IMU tick.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorFrame {
    pub t: f64,
    pub imu: ImuSample,
    pub legs: [JointSample; 2],
}

impl SensorFrame {
    pub fn leg(&self, leg: Leg) -> &JointSample {
        &self.legs[leg.index()]
    }

    pub fn any_contact(&self) -> bool {
        self.legs.iter().any(|l| l.contact)
    }
}
