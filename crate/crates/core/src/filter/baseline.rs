//! Contact-aided InEKF on `SE_4(3)`: orientation, velocity, position and one
//! world-frame contact point per foot. Kinematics are taken as the foot
//! position in the IMU frame, i.e. the IMU and measurement frames are assumed
//! aligned. Tangent order `(rot, vel, pos, left_foot, right_foot)`.

use super::{kalman_correction, symmetrize, Estimator, FilterConfig, FilterError, MeasurementKind, StepReport, UpdateInfo};
use crate::lie::{skew, so3_left_jacobian, Matrix15, Rotation3};
use crate::models::{transition_matrix, ImuSample, JointSample, ModelError, NoiseConfig, SensorFrame};
use nalgebra::{Matrix3, SMatrix, Vector3};
use serde::{Deserialize, Serialize};

/// How a foot's contact point is initialized at touchdown.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FootInit {
    #[default]
    /// New point error equals the current position error plus the
    /// kinematic noise, carrying over its correlations.
    Correlated,
    /// Decorrelated reset to the given variance (m^2).
    Reset { variance: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineState {
    pub r: Rotation3,
    pub v: Vector3<f64>,
    pub p: Vector3<f64>,
    /// World-frame contact points, indexed by [`crate::models::Leg::index`].
    pub feet: [Vector3<f64>; 2],
    pub in_contact: [bool; 2],
    pub cov: Matrix15,
    pub t: f64,
    pub last_imu: Option<ImuSample>,
}

const FOOT: [usize; 2] = [9, 12];

impl BaselineState {
    /// `cov_rvp` supplies the orientation/velocity/position blocks; foot
    /// blocks are filled at touchdown.
    pub fn new(r: Rotation3, v: Vector3<f64>, p: Vector3<f64>, cov_rvp: &Matrix15, t: f64) -> Self {
        let mut cov = Matrix15::zeros();
        cov.fixed_view_mut::<9, 9>(0, 0).copy_from(&cov_rvp.fixed_view::<9, 9>(0, 0));
        for base in FOOT {
            cov.fixed_view_mut::<3, 3>(base, base).copy_from(&Matrix3::identity());
        }
        Self { r, v, p, feet: [Vector3::zeros(); 2], in_contact: [false; 2], cov: symmetrize(&cov), t, last_imu: None }
    }

    pub fn adjoint(&self) -> Matrix15 {
        let r = self.r.matrix();
        let mut ad = Matrix15::zeros();
        for k in 0..5 {
            ad.fixed_view_mut::<3, 3>(3 * k, 3 * k).copy_from(r);
        }
        for (k, x) in [self.v, self.p, self.feet[0], self.feet[1]].iter().enumerate() {
            ad.fixed_view_mut::<3, 3>(3 * (k + 1), 0).copy_from(&(skew(x) * r));
        }
        ad
    }

    fn process_noise(&self, noise: &NoiseConfig) -> Matrix15 {
        let vars = [noise.sd_gyro.powi(2), noise.sd_accel.powi(2), 0.0, noise.sd_contact_vel.powi(2), noise.sd_contact_vel.powi(2)];
        Matrix15::from_fn(|i, j| if i == j { vars[i / 3] } else { 0.0 })
    }

    pub fn propagate(&self, imu: &ImuSample, dt: f64, noise: &NoiseConfig, gravity: &Vector3<f64>) -> Result<Self, FilterError> {
        if !imu.is_finite() {
            return Err(FilterError::NonFiniteImu { t: imu.t });
        }
        if !(dt > 0.0) {
            return Err(FilterError::NonPositiveStep { dt });
        }
        let accel_world = self.r.matrix() * imu.accel + gravity;
        let phi = transition_matrix(dt, gravity);
        let ad = self.adjoint();
        let q = ad * self.process_noise(noise) * ad.transpose();
        let cov = phi * self.cov * phi.transpose() + q * dt;
        Ok(Self {
            r: (self.r * Rotation3::exp(&(imu.gyro * dt))).renormalized(),
            v: self.v + accel_world * dt,
            p: self.p + self.v * dt + accel_world * (0.5 * dt * dt),
            cov: symmetrize(&cov),
            t: self.t + dt,
            ..self.clone()
        })
    }

    /// Foot position in the IMU frame as the baseline sees it.
    fn foot_vector(joints: &JointSample, cfg: &FilterConfig) -> Result<Vector3<f64>, FilterError> {
        match cfg.measurement {
            MeasurementKind::Fk => Ok(cfg.legs.chain(joints.leg).forward_kinematics(&joints.angles)?),
            MeasurementKind::Vec3 => Ok(joints.marker.ok_or(ModelError::MissingMarker { leg: joints.leg })?.position),
        }
    }

    fn touchdown(&mut self, slot: usize, foot_body: &Vector3<f64>, cfg: &FilterConfig) {
        self.feet[slot] = self.p + self.r.matrix() * foot_body;
        let base = FOOT[slot];
        match cfg.foot_init {
            FootInit::Correlated => {
                let sd = cfg.noise.sd_kin_position;
                let p_rows = self.cov.fixed_view::<3, 15>(6, 0).into_owned();
                self.cov.fixed_view_mut::<3, 15>(base, 0).copy_from(&p_rows);
                let p_cols = self.cov.fixed_view::<15, 3>(0, 6).into_owned();
                self.cov.fixed_view_mut::<15, 3>(0, base).copy_from(&p_cols);
                let pp = self.cov.fixed_view::<3, 3>(6, 6).into_owned();
                let r = self.r.matrix();
                self.cov.fixed_view_mut::<3, 3>(base, base).copy_from(&(pp + r * Matrix3::identity() * (sd * sd) * r.transpose()));
            }
            FootInit::Reset { variance } => {
                self.cov.fixed_view_mut::<3, 15>(base, 0).fill(0.0);
                self.cov.fixed_view_mut::<15, 3>(0, base).fill(0.0);
                self.cov.fixed_view_mut::<3, 3>(base, base).copy_from(&(Matrix3::identity() * variance));
            }
        }
        self.cov = symmetrize(&self.cov);
    }

    /// Right-invariant position update: residual `(d - p) - R y` with
    /// `H = [0, 0, I, -I]` on the stance foot's block.
    pub fn update_foot(&self, slot: usize, foot_body: &Vector3<f64>, noise: &NoiseConfig) -> Result<(Self, Vector3<f64>), FilterError> {
        let r = self.r.matrix();
        let innovation = (self.feet[slot] - self.p) - r * foot_body;
        let mut h = SMatrix::<f64, 3, 15>::zeros();
        h.fixed_view_mut::<3, 3>(0, 6).copy_from(&Matrix3::identity());
        h.fixed_view_mut::<3, 3>(0, FOOT[slot]).copy_from(&(-Matrix3::identity()));
        let sd = noise.sd_kin_position;
        let n = r * Matrix3::identity() * (sd * sd) * r.transpose();
        let (delta, cov) = kalman_correction(&self.cov, &h, &n, &innovation)?;
        let block = |k: usize| delta.fixed_rows::<3>(3 * k).into_owned();
        let phi = block(0);
        let dr = Rotation3::exp(&phi);
        let jl = so3_left_jacobian(&phi);
        let apply = |x: &Vector3<f64>, k: usize| dr.matrix() * x + jl * block(k);
        let next = Self {
            r: (dr * self.r).renormalized(),
            v: apply(&self.v, 1),
            p: apply(&self.p, 2),
            feet: [apply(&self.feet[0], 3), apply(&self.feet[1], 4)],
            cov,
            ..self.clone()
        };
        Ok((next, innovation))
    }
}

impl Estimator for BaselineState {
    fn step(&self, frame: &SensorFrame, cfg: &FilterConfig) -> Result<(Self, StepReport), FilterError> {
        if !frame.imu.is_finite() {
            return Err(FilterError::NonFiniteImu { t: frame.t });
        }
        let dt = frame.t - self.t;
        if dt < 0.0 {
            return Err(FilterError::NonMonotoneTime { t: frame.t, filter_t: self.t });
        }
        let mut report = StepReport::default();
        let mut state = match (self.last_imu, dt > 0.0) {
            (Some(held), true) => {
                report.propagated = true;
                self.propagate(&held, dt, &cfg.noise, &cfg.gravity)?
            }
            _ => self.clone(),
        };
        state.t = frame.t;
        state.last_imu = Some(frame.imu);
        for (slot, joints) in frame.legs.iter().enumerate() {
            if !joints.contact {
                state.in_contact[slot] = false;
                continue;
            }
            let foot_body = Self::foot_vector(joints, cfg)?;
            if !state.in_contact[slot] {
                state.touchdown(slot, &foot_body, cfg);
                state.in_contact[slot] = true;
            }
            let info = match state.update_foot(slot, &foot_body, &cfg.noise) {
                Ok((next, innovation)) => {
                    state = next;
                    UpdateInfo { leg: joints.leg, innovation, applied: true }
                }
                Err(FilterError::SingularInnovation { .. }) => UpdateInfo { leg: joints.leg, innovation: Vector3::zeros(), applied: false },
                Err(e) => return Err(e),
            };
            report.updates[slot] = Some(info);
        }
        Ok((state, report))
    }

    fn rotation(&self) -> Rotation3 {
        self.r
    }

    fn velocity(&self) -> Vector3<f64> {
        self.v
    }

    fn position(&self) -> Vector3<f64> {
        self.p
    }

    fn covariance(&self) -> &Matrix15 {
        &self.cov
    }

    fn time(&self) -> f64 {
        self.t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::InitialCovariance;
    use crate::lie::Vector15;
    use crate::models::{Leg, GRAVITY};
    use approx::assert_relative_eq;
    use nalgebra::SMatrix;

    type Matrix8 = SMatrix<f64, 8, 8>;

    fn frame(t: f64, contact: [bool; 2]) -> SensorFrame {
        let leg =
            |leg: Leg, contact: bool| JointSample { t, leg, angles: vec![0.1, 0.0, 0.0, 0.3, -0.1, 0.0, 0.0], rates: vec![0.0; 7], contact, marker: None };
        SensorFrame { t, imu: ImuSample { t, accel: -GRAVITY, gyro: Vector3::zeros() }, legs: [leg(Leg::Left, contact[0]), leg(Leg::Right, contact[1])] }
    }

    fn start() -> BaselineState {
        BaselineState::new(Rotation3::identity(), Vector3::zeros(), Vector3::zeros(), &InitialCovariance::default().matrix(), 0.0)
    }

    fn realization(s: &BaselineState) -> Matrix8 {
        let mut m = Matrix8::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(s.r.matrix());
        for (k, x) in [s.v, s.p, s.feet[0], s.feet[1]].iter().enumerate() {
            m.fixed_view_mut::<3, 1>(0, 3 + k).copy_from(x);
        }
        m
    }

    #[test]
    fn adjoint_defining_identity() {
        let mut s = start();
        s.r = Rotation3::exp(&Vector3::new(0.3, -0.5, 0.8));
        s.v = Vector3::new(0.1, 0.2, 0.3);
        s.p = Vector3::new(-1.0, 0.5, 0.9);
        s.feet = [Vector3::new(0.3, 0.2, 0.0), Vector3::new(0.3, -0.2, 0.1)];
        let z = Vector15::from_fn(|i, _| (i as f64 * 0.37).sin());
        let hat = |z: &Vector15| {
            let mut a = Matrix8::zeros();
            a.fixed_view_mut::<3, 3>(0, 0).copy_from(&skew(&z.fixed_rows::<3>(0).into_owned()));
            for k in 0..4 {
                a.fixed_view_mut::<3, 1>(0, 3 + k).copy_from(&z.fixed_rows::<3>(3 + 3 * k));
            }
            a
        };
        let m = realization(&s);
        let conj = m * hat(&z) * m.try_inverse().unwrap();
        let mut expected = Vector15::zeros();
        expected.fixed_rows_mut::<3>(0).copy_from(&crate::lie::unskew(&conj.fixed_view::<3, 3>(0, 0).into_owned()));
        for k in 0..4 {
            expected.fixed_rows_mut::<3>(3 + 3 * k).copy_from(&conj.fixed_view::<3, 1>(0, 3 + k));
        }
        assert_relative_eq!(s.adjoint() * z, expected, epsilon = 1e-12);
    }

    #[test]
    fn touchdown_places_foot_from_kinematics() {
        let cfg = FilterConfig::default();
        let (s, report) = start().step(&frame(0.0, [true, false]), &cfg).unwrap();
        assert!(s.in_contact[0] && !s.in_contact[1]);
        let expected = cfg.legs.left.forward_kinematics(&frame(0.0, [true, false]).legs[0].angles).unwrap();
        assert_relative_eq!(s.feet[0], expected, epsilon = 1e-9);
        assert!(report.updates[0].unwrap().applied);
        assert!(report.updates[1].is_none());
        // Correlated init copies the position block.
        assert_relative_eq!(s.cov.fixed_view::<3, 3>(9, 6).into_owned(), s.cov.fixed_view::<3, 3>(6, 6).into_owned(), epsilon = 0.05);
    }

    #[test]
    fn stationary_truth_stays_put() {
        let cfg = FilterConfig::default();
        let mut s = start();
        for i in 0..400 {
            s = s.step(&frame(i as f64 * 0.0025, [true, true]), &cfg).unwrap().0;
        }
        assert!(s.v.norm() < 1e-9);
        assert!(s.r.angle() < 1e-9);
    }

    #[test]
    fn swing_frames_only_propagate() {
        let cfg = FilterConfig::default();
        let (s, _) = start().step(&frame(0.0, [false, false]), &cfg).unwrap();
        let (s, report) = s.step(&frame(0.01, [false, false]), &cfg).unwrap();
        assert!(report.propagated);
        assert_eq!(report.applied_updates(), 0);
        assert_eq!(s.in_contact, [false, false]);
    }

    #[test]
    fn reset_init_decorrelates() {
        let cfg = FilterConfig { foot_init: FootInit::Reset { variance: 1.0 }, ..FilterConfig::default() };
        let mut s = start();
        s.cov = InitialCovariance::default().matrix();
        s.touchdown(1, &Vector3::new(0.0, -0.1, -0.9), &cfg);
        assert_eq!(s.cov.fixed_view::<3, 3>(12, 12).into_owned(), Matrix3::identity());
        assert_eq!(s.cov.fixed_view::<3, 3>(12, 6).into_owned(), Matrix3::zeros());
    }

    #[test]
    fn velocity_error_shrinks_with_stance_updates() {
        let cfg = FilterConfig::default();
        let mut s = start();
        s.v = Vector3::new(0.5, -0.3, 0.2);
        let first = s.v.norm();
        for i in 0..200 {
            s = s.step(&frame(i as f64 * 0.0025, [true, true]), &cfg).unwrap().0;
        }
        assert!(s.v.norm() < 0.2 * first, "velocity error {}", s.v.norm());
    }
}
