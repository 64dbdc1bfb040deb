use serde::{Deserialize, Serialize};

/// Noise standard deviations shared by the simulator and both filters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Accelerometer, m/s^2.
    pub sd_accel: f64,
    /// Gyroscope, rad/s.
    pub sd_gyro: f64,
    /// Lumped kinematic velocity measurement of the offset-aware filter, m/s.
    pub sd_kin_fk: f64,
    /// Placement offset translation random walk, m.
    pub sd_offset_p: f64,
    /// Placement offset rotation random walk, rad.
    pub sd_offset_r: f64,
    /// Contact-foot slip of the baseline filter, m/s.
    pub sd_contact_vel: f64,
    /// Foot position measurement of the baseline filter, m.
    pub sd_kin_position: f64,
    /// Joint angle measurement, rad.
    pub sd_joint_angle: f64,
    /// Joint rate measurement, rad/s.
    pub sd_joint_rate: f64,
    /// Directly measured foot position (3-D vector path), m.
    pub sd_marker_pos: f64,
    /// Directly measured foot velocity (3-D vector path), m/s.
    pub sd_marker_vel: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            sd_accel: 0.2,
            sd_gyro: 0.05,
            sd_kin_fk: 0.5,
            sd_offset_p: 0.05,
            sd_offset_r: 0.05,
            sd_contact_vel: 0.05,
            sd_kin_position: 0.1,
            sd_joint_angle: 0.5_f64.to_radians(),
            sd_joint_rate: 2.0_f64.to_radians(),
            sd_marker_pos: 0.005,
            sd_marker_vel: 0.02,
        }
    }
}

impl NoiseConfig {
    /// All simulator-side noise switched off; filter tuning values kept.
    pub fn noiseless_sensors(self) -> Self {
        Self { sd_accel: 0.0, sd_gyro: 0.0, sd_joint_angle: 0.0, sd_joint_rate: 0.0, sd_marker_pos: 0.0, sd_marker_vel: 0.0, ..self }
    }

    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("sd_accel", self.sd_accel),
            ("sd_gyro", self.sd_gyro),
            ("sd_kin_fk", self.sd_kin_fk),
            ("sd_offset_p", self.sd_offset_p),
            ("sd_offset_r", self.sd_offset_r),
            ("sd_contact_vel", self.sd_contact_vel),
            ("sd_kin_position", self.sd_kin_position),
            ("sd_joint_angle", self.sd_joint_angle),
            ("sd_joint_rate", self.sd_joint_rate),
            ("sd_marker_pos", self.sd_marker_pos),
            ("sd_marker_vel", self.sd_marker_vel),
        ];
        for (name, value) in fields {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(format!("{name} must be a finite non-negative number, got {value}"));
            }
        }
        Ok(())
    }
}
