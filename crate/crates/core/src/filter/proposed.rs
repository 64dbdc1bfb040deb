use super::{kalman_correction, symmetrize, Estimator, FilterConfig, FilterError, MeasurementKind, StepReport, UpdateInfo};
use crate::lie::{Matrix15, Rotation3, StateElement, TangentVector};
use crate::models::{
    assemble_measurement_3d, assemble_measurement_fk, measurement_jacobian, transition_matrix, ImuSample, JointSample, Measurement, MeasurementJacobian,
    ModelError, NoiseConfig,
};
use nalgebra::Vector3;

/// Estimate of the trunk state with IMU placement offset, and its
/// right-invariant error covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub x: StateElement,
    pub p: Matrix15,
    /// Time of the last processed sample.
    pub t: f64,
    /// IMU sample held over the next propagation interval.
    pub last_imu: Option<ImuSample>,
}

impl FilterState {
    pub fn new(x: StateElement, p: Matrix15, t: f64) -> Self {
        Self { x, p: symmetrize(&p), t, last_imu: None }
    }

    /// Continuous-time process noise `Cov(w)` in the body frame.
    pub fn process_noise(noise: &NoiseConfig) -> Matrix15 {
        let vars = [noise.sd_gyro.powi(2), noise.sd_accel.powi(2), 0.0, noise.sd_offset_r.powi(2), noise.sd_offset_p.powi(2)];
        Matrix15::from_fn(|i, j| if i == j { vars[i / 3] } else { 0.0 })
    }

    /// Zero-order-hold integration of the IMU dynamics over `dt` and the
    /// covariance step `P <- Phi P Phi^T + Ad Cov(w) Ad^T dt`.
    pub fn propagate(&self, imu: &ImuSample, dt: f64, noise: &NoiseConfig, gravity: &Vector3<f64>) -> Result<Self, FilterError> {
        if !imu.is_finite() {
            return Err(FilterError::NonFiniteImu { t: imu.t });
        }
        if !(dt > 0.0) {
            return Err(FilterError::NonPositiveStep { dt });
        }
        let x = &self.x;
        let r = x.r.matrix();
        let accel_world = r * imu.accel + gravity;
        let propagated = StateElement {
            r: (x.r * Rotation3::exp(&(imu.gyro * dt))).renormalized(),
            v: x.v + accel_world * dt,
            p: x.p + x.v * dt + accel_world * (0.5 * dt * dt),
            dr: x.dr,
            dp: x.dp,
        };
        let phi = transition_matrix(dt, gravity);
        let ad = x.adjoint();
        let q = ad * Self::process_noise(noise) * ad.transpose();
        let p = phi * self.p * phi.transpose() + q * dt;
        Ok(Self { x: propagated, p: symmetrize(&p), t: self.t + dt, last_imu: self.last_imu })
    }

    /// `X <- exp(K (y - h)) X` with Joseph-form covariance.
    pub fn update(&self, meas: &Measurement, h: &MeasurementJacobian) -> Result<Self, FilterError> {
        let (delta, p) = kalman_correction(&self.p, h, &meas.noise, &meas.innovation())?;
        let x = (StateElement::exp(&TangentVector(delta)) * self.x).renormalized();
        Ok(Self { x, p, ..self.clone() })
    }

    /// Measurement and Jacobian for one stance leg at the current estimate.
    pub fn measure(&self, joints: &JointSample, imu: &ImuSample, cfg: &FilterConfig) -> Result<(Measurement, MeasurementJacobian), FilterError> {
        let meas = match cfg.measurement {
            MeasurementKind::Fk => assemble_measurement_fk(&self.x, joints, imu, cfg.legs.chain(joints.leg), &cfg.noise)?,
            MeasurementKind::Vec3 => {
                if !joints.contact {
                    return Err(ModelError::NoContact { leg: joints.leg }.into());
                }
                let marker = joints.marker.ok_or(ModelError::MissingMarker { leg: joints.leg })?;
                assemble_measurement_3d(&self.x, &marker.velocity, &marker.position, imu, &cfg.noise)
            }
        };
        let h = measurement_jacobian(&self.x, &imu.gyro, &meas.foot);
        Ok((meas, h))
    }
}

impl Estimator for FilterState {
    /// Propagates over the interval since the previous frame with the held IMU
    /// sample, then applies one update per stance leg (left before right).
    fn step(&self, frame: &crate::models::SensorFrame, cfg: &FilterConfig) -> Result<(Self, StepReport), FilterError> {
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
            _ => Self { t: frame.t, ..self.clone() },
        };
        state.t = frame.t;
        state.last_imu = Some(frame.imu);
        for (slot, joints) in report.updates.iter_mut().zip(&frame.legs) {
            if !joints.contact {
                continue;
            }
            let (meas, h) = state.measure(joints, &frame.imu, cfg)?;
            let innovation = meas.innovation();
            let applied = match state.update(&meas, &h) {
                Ok(next) => {
                    state = next;
                    true
                }
                Err(FilterError::SingularInnovation { .. }) => false,
                Err(e) => return Err(e),
            };
            *slot = Some(UpdateInfo { leg: joints.leg, innovation, applied });
        }
        Ok((state, report))
    }

    fn rotation(&self) -> Rotation3 {
        self.x.r
    }

    fn velocity(&self) -> Vector3<f64> {
        self.x.v
    }

    fn position(&self) -> Vector3<f64> {
        self.x.p
    }

    fn covariance(&self) -> &Matrix15 {
        &self.p
    }

    fn time(&self) -> f64 {
        self.t
    }
}
