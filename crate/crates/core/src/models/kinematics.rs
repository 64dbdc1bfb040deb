use super::{Leg, ModelError};
use crate::lie::Rotation3;
use nalgebra::{Dyn, Matrix3, OMatrix, Vector3, U3};
use serde::{Deserialize, Serialize};

pub type FkJacobian = OMatrix<f64, U3, Dyn>;

/// Serial leg chain from the measurement frame (pelvis) to the sole contact
/// point: hip joints, thigh, knee joints, shank, ankle joints, sole offset.
///
/// Frame convention: measurement frame x forward, y left, z up. With all
/// angles zero the leg hangs straight along -z. Each joint rotates about its
/// axis expressed in the frame of the preceding segment; joints within a group
/// apply in listed order (intrinsic).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinematicChain {
    pub hip_offset: Vector3<f64>,
    pub thigh_len: f64,
    pub shank_len: f64,
    pub ankle_to_sole: Vector3<f64>,
    pub hip_axes: Vec<Vector3<f64>>,
    pub knee_axes: Vec<Vector3<f64>>,
    pub ankle_axes: Vec<Vector3<f64>>,
}

impl KinematicChain {
    pub const DEFAULT_THIGH: f64 = 0.42;
    pub const DEFAULT_SHANK: f64 = 0.43;

    /// 7-DoF left leg: hip (flexion, abduction, rotation), knee flexion,
    /// ankle (dorsiflexion, inversion, rotation).
    pub fn default_left() -> Self {
        Self {
            hip_offset: Vector3::new(0.0, 0.09, -0.08),
            thigh_len: Self::DEFAULT_THIGH,
            shank_len: Self::DEFAULT_SHANK,
            ankle_to_sole: Vector3::new(0.05, 0.0, -0.07),
            hip_axes: vec![-Vector3::y(), Vector3::x(), Vector3::z()],
            knee_axes: vec![Vector3::y()],
            ankle_axes: vec![-Vector3::y(), Vector3::x(), Vector3::z()],
        }
    }

    pub fn default_right() -> Self {
        Self::default_left().mirrored()
    }

    /// Mirror image across the sagittal (x-z) plane.
    pub fn mirrored(&self) -> Self {
        let point = |v: &Vector3<f64>| Vector3::new(v.x, -v.y, v.z);
        // Axes are pseudo-vectors: reflection flips the in-plane components.
        let axis = |v: &Vector3<f64>| Vector3::new(-v.x, v.y, -v.z);
        Self {
            hip_offset: point(&self.hip_offset),
            thigh_len: self.thigh_len,
            shank_len: self.shank_len,
            ankle_to_sole: point(&self.ankle_to_sole),
            hip_axes: self.hip_axes.iter().map(axis).collect(),
            knee_axes: self.knee_axes.iter().map(axis).collect(),
            ankle_axes: self.ankle_axes.iter().map(axis).collect(),
        }
    }

    /// Three-DoF knee (flexion, abduction, rotation), k = 9.
    pub fn with_full_knee(mut self) -> Self {
        let flex = self.knee_axes.first().copied().unwrap_or_else(Vector3::y);
        let abd = self.hip_axes.get(1).copied().unwrap_or_else(Vector3::x);
        let rot = self.hip_axes.get(2).copied().unwrap_or_else(Vector3::z);
        self.knee_axes = vec![flex, abd, rot];
        self
    }

    pub fn dof(&self) -> usize {
        self.hip_axes.len() + self.knee_axes.len() + self.ankle_axes.len()
    }

    /// Index of the first knee joint in the angle vector.
    pub fn knee_index(&self) -> usize {
        self.hip_axes.len()
    }

    pub fn ankle_index(&self) -> usize {
        self.hip_axes.len() + self.knee_axes.len()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.thigh_len > 0.0 && self.shank_len > 0.0) {
            return Err(ModelError::InvalidChain("segment lengths must be positive".into()));
        }
        let axes = self.hip_axes.iter().chain(&self.knee_axes).chain(&self.ankle_axes);
        for a in axes {
            if (a.norm() - 1.0).abs() > 1e-9 {
                return Err(ModelError::InvalidChain(format!("joint axis {a:?} is not unit length")));
            }
        }
        Ok(())
    }

    fn check_len(&self, alpha: &[f64]) -> Result<(), ModelError> {
        if alpha.len() != self.dof() {
            return Err(ModelError::JointCount { expected: self.dof(), got: alpha.len() });
        }
        Ok(())
    }

    /// Walks the chain once, returning the sole point and, per joint, the
    /// joint axis and origin in the measurement frame.
    fn walk(&self, alpha: &[f64], mut visit: impl FnMut(Vector3<f64>, Vector3<f64>)) -> (Vector3<f64>, Matrix3<f64>) {
        let mut rot = Matrix3::identity();
        let mut pos = self.hip_offset;
        let mut angles = alpha.iter();
        let mut joints = |axes: &[Vector3<f64>], rot: &mut Matrix3<f64>, pos: &Vector3<f64>| {
            for axis in axes {
                let angle = *angles.next().expect("angle count checked by caller");
                visit(*rot * axis, *pos);
                *rot *= Rotation3::exp(&(axis * angle)).matrix();
            }
        };
        joints(&self.hip_axes, &mut rot, &pos);
        pos += rot * Vector3::new(0.0, 0.0, -self.thigh_len);
        joints(&self.knee_axes, &mut rot, &pos);
        pos += rot * Vector3::new(0.0, 0.0, -self.shank_len);
        joints(&self.ankle_axes, &mut rot, &pos);
        pos += rot * self.ankle_to_sole;
        (pos, rot)
    }

    /// `h_F(alpha)`: sole contact point in the measurement frame.
    pub fn forward_kinematics(&self, alpha: &[f64]) -> Result<Vector3<f64>, ModelError> {
        self.check_len(alpha)?;
        Ok(self.walk(alpha, |_, _| {}).0)
    }

    /// Sole position and orientation of the foot segment.
    pub fn foot_pose(&self, alpha: &[f64]) -> Result<(Vector3<f64>, Matrix3<f64>), ModelError> {
        self.check_len(alpha)?;
        Ok(self.walk(alpha, |_, _| {}))
    }

    /// Geometric Jacobian `d h_F / d alpha` (3 x k).
    pub fn fk_jacobian(&self, alpha: &[f64]) -> Result<FkJacobian, ModelError> {
        Ok(self.fk_with_jacobian(alpha)?.1)
    }

    pub fn fk_with_jacobian(&self, alpha: &[f64]) -> Result<(Vector3<f64>, FkJacobian), ModelError> {
        self.check_len(alpha)?;
        let mut axes = Vec::with_capacity(alpha.len());
        let (end, _) = self.walk(alpha, |axis, origin| axes.push((axis, origin)));
        let jac = FkJacobian::from_fn(alpha.len(), |row, col| {
            let (axis, origin) = axes[col];
            axis.cross(&(end - origin))[row]
        });
        Ok((end, jac))
    }
}

/// Chains for both legs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegKinematics {
    pub left: KinematicChain,
    pub right: KinematicChain,
}

impl Default for LegKinematics {
    fn default() -> Self {
        Self { left: KinematicChain::default_left(), right: KinematicChain::default_right() }
    }
}

impl LegKinematics {
    pub fn chain(&self, leg: Leg) -> &KinematicChain {
        match leg {
            Leg::Left => &self.left,
            Leg::Right => &self.right,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.left.validate()?;
        self.right.validate()?;
        if self.left.dof() != self.right.dof() {
            return Err(ModelError::InvalidChain("left and right chains differ in joint count".into()));
        }
        Ok(())
    }
}
