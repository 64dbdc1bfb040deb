//! Kinematic velocity measurements relating the trunk state to the stance
//! leg. Both forms predict
//!
//! `h(X) = dR R^T v - (dp)x dR w - (d)x dR w`
//!
//! where `d` is the sole point in the measurement frame, either from forward
//! kinematics (`d = h_F(alpha)`) or measured directly.

use super::{ImuSample, JointSample, KinematicChain, ModelError, NoiseConfig};
use crate::lie::{skew, StateElement};
use nalgebra::{DVector, Matrix3, SMatrix, Vector3};

pub type MeasurementJacobian = SMatrix<f64, 3, 15>;

/// Measurement vector `y`, prediction `h(X)` at the estimate, and the
/// measurement noise covariance `N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub y: Vector3<f64>,
    pub h: Vector3<f64>,
    pub noise: Matrix3<f64>,
    /// Sole point used in the prediction and in `H`.
    pub foot: Vector3<f64>,
}

impl Measurement {
    pub fn innovation(&self) -> Vector3<f64> {
        self.y - self.h
    }
}

pub fn predicted_measurement(x: &StateElement, gyro: &Vector3<f64>, foot: &Vector3<f64>) -> Vector3<f64> {
    let dr_w = x.dr.matrix() * gyro;
    x.dr.matrix() * (x.r.matrix().transpose() * x.v) - x.dp.cross(&dr_w) - foot.cross(&dr_w)
}

/// `N = R dR^T Cov(n) dR R^T` with isotropic `Cov(n)`.
fn noise_covariance(x: &StateElement, sd: f64) -> Matrix3<f64> {
    let rot = x.r.matrix() * x.dr.matrix().transpose();
    rot * (Matrix3::identity() * (sd * sd)) * rot.transpose()
}

/// Forward-kinematics form: `y = -J(alpha) alpha_dot`.
pub fn assemble_measurement_fk(
    x: &StateElement,
    joints: &JointSample,
    imu: &ImuSample,
    chain: &KinematicChain,
    noise: &NoiseConfig,
) -> Result<Measurement, ModelError> {
    if !joints.contact {
        return Err(ModelError::NoContact { leg: joints.leg });
    }
    if joints.rates.len() != joints.angles.len() {
        return Err(ModelError::JointCount { expected: joints.angles.len(), got: joints.rates.len() });
    }
    let (foot, jac) = chain.fk_with_jacobian(&joints.angles)?;
    let y = -(jac * DVector::from_column_slice(&joints.rates));
    Ok(Measurement { y, h: predicted_measurement(x, &imu.gyro, &foot), noise: noise_covariance(x, noise.sd_kin_fk), foot })
}

/// Directly measured foot vector: `y = -v_M`, `d = d_M`.
pub fn assemble_measurement_3d(x: &StateElement, foot_velocity: &Vector3<f64>, foot: &Vector3<f64>, imu: &ImuSample, noise: &NoiseConfig) -> Measurement {
    Measurement { y: -foot_velocity, h: predicted_measurement(x, &imu.gyro, foot), noise: noise_covariance(x, noise.sd_kin_fk), foot: *foot }
}

/// Linearization of `h(exp(zeta) X)` at `zeta = 0`:
/// `H = [0, dR R^T, 0, h4, (dR w)x]`.
pub fn measurement_jacobian(x: &StateElement, gyro: &Vector3<f64>, foot: &Vector3<f64>) -> MeasurementJacobian {
    let dr_rt = x.dr.matrix() * x.r.matrix().transpose();
    let w = skew(&(x.dr.matrix() * gyro));
    let dp = skew(&x.dp);
    let h4 = -skew(&(dr_rt * x.v)) - w * dp + dp * w + skew(foot) * w;
    let mut h = MeasurementJacobian::zeros();
    h.fixed_view_mut::<3, 3>(0, 3).copy_from(&dr_rt);
    h.fixed_view_mut::<3, 3>(0, 9).copy_from(&h4);
    h.fixed_view_mut::<3, 3>(0, 12).copy_from(&w);
    h
}

pub fn measurement_jacobian_fk(x: &StateElement, gyro: &Vector3<f64>, angles: &[f64], chain: &KinematicChain) -> Result<MeasurementJacobian, ModelError> {
    Ok(measurement_jacobian(x, gyro, &chain.forward_kinematics(angles)?))
}

pub fn measurement_jacobian_3d(x: &StateElement, gyro: &Vector3<f64>, foot: &Vector3<f64>) -> MeasurementJacobian {
    measurement_jacobian(x, gyro, foot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::{Rotation3, TangentVector, Vector15};
    use crate::models::Leg;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn imu(gyro: Vector3<f64>) -> ImuSample {
        ImuSample { t: 0.0, accel: Vector3::zeros(), gyro }
    }

    fn joints(angles: Vec<f64>, rates: Vec<f64>, contact: bool) -> JointSample {
        JointSample { t: 0.0, leg: Leg::Left, angles, rates, contact, marker: None }
    }

    fn random_state(rng: &mut impl Rng) -> StateElement {
        StateElement::exp(&TangentVector(Vector15::from_fn(|_, _| rng.random_range(-1.5..1.5))))
    }

    #[test]
    fn stationary_truth_gives_zero() {
        let chain = KinematicChain::default_left();
        let x = StateElement { r: Rotation3::exp(&Vector3::new(0.1, 0.2, 0.3)), dp: Vector3::new(0.02, 0.0, 0.05), ..StateElement::identity() };
        let m = assemble_measurement_fk(&x, &joints(vec![0.1; 7], vec![0.0; 7], true), &imu(Vector3::zeros()), &chain, &NoiseConfig::default()).unwrap();
        assert_eq!(m.y, Vector3::zeros());
        assert_eq!(m.h, Vector3::zeros());
        let m3 = assemble_measurement_3d(&x, &Vector3::zeros(), &m.foot, &imu(Vector3::zeros()), &NoiseConfig::default());
        assert_eq!(m3.y, Vector3::zeros());
        assert_eq!(m3.h, Vector3::zeros());
    }

    #[test]
    fn zero_offset_reduces_to_leg_odometry() {
        let chain = KinematicChain::default_left();
        let r = Rotation3::exp(&Vector3::new(0.3, -0.2, 0.5));
        let x = StateElement { r, v: Vector3::new(0.4, -0.3, 0.1), ..StateElement::identity() };
        let m = assemble_measurement_fk(&x, &joints(vec![0.2; 7], vec![0.1; 7], true), &imu(Vector3::zeros()), &chain, &NoiseConfig::default()).unwrap();
        assert_relative_eq!(m.h, r.matrix().transpose() * x.v, epsilon = 1e-15);
    }

    #[test]
    fn refuses_swing_leg() {
        let chain = KinematicChain::default_left();
        let err = assemble_measurement_fk(
            &StateElement::identity(),
            &joints(vec![0.0; 7], vec![0.0; 7], false),
            &imu(Vector3::zeros()),
            &chain,
            &NoiseConfig::default(),
        );
        assert_eq!(err, Err(ModelError::NoContact { leg: Leg::Left }));
    }

    #[test]
    fn fk_and_3d_predictions_agree_on_same_foot() {
        let chain = KinematicChain::default_left();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let x = random_state(&mut rng);
        let angles: Vec<f64> = (0..7).map(|_| rng.random_range(-0.5..0.5)).collect();
        let gyro = Vector3::new(0.3, -0.7, 1.1);
        let fk = assemble_measurement_fk(&x, &joints(angles.clone(), vec![0.2; 7], true), &imu(gyro), &chain, &NoiseConfig::default()).unwrap();
        let d = chain.forward_kinematics(&angles).unwrap();
        let v3 = assemble_measurement_3d(&x, &Vector3::zeros(), &d, &imu(gyro), &NoiseConfig::default());
        assert_eq!(fk.h, v3.h);
        assert_eq!(measurement_jacobian_fk(&x, &gyro, &angles, &chain).unwrap(), measurement_jacobian_3d(&x, &gyro, &d));
    }

    #[test]
    fn noise_is_isotropic_kinematic_sd() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let x = random_state(&mut rng);
        let m = assemble_measurement_3d(&x, &Vector3::zeros(), &Vector3::zeros(), &imu(Vector3::zeros()), &NoiseConfig::default());
        assert_relative_eq!(m.noise, Matrix3::identity() * 0.25, epsilon = 1e-14);
    }

    #[test]
    fn jacobian_identity_estimate() {
        let h = measurement_jacobian(&StateElement::identity(), &Vector3::zeros(), &Vector3::new(0.1, 0.2, -0.9));
        let mut expected = MeasurementJacobian::zeros();
        expected.fixed_view_mut::<3, 3>(0, 3).copy_from(&Matrix3::identity());
        assert_eq!(h, expected);
    }

    #[test]
    fn jacobian_zero_offset_velocity_block() {
        let r = Rotation3::exp(&Vector3::new(0.3, -0.2, 0.5));
        let x = StateElement { r, v: Vector3::new(1.0, 2.0, 3.0), ..StateElement::identity() };
        let h = measurement_jacobian(&x, &Vector3::new(0.2, 0.1, 0.0), &Vector3::new(0.0, 0.1, -0.9));
        assert_eq!(h.fixed_view::<3, 3>(0, 3).into_owned(), r.matrix().transpose());
    }

    #[test]
    fn jacobian_matches_retraction_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let step = 1e-6;
        for _ in 0..100 {
            let x = random_state(&mut rng);
            let gyro = Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0));
            let foot = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let analytic = measurement_jacobian(&x, &gyro, &foot);
            let numeric = MeasurementJacobian::from_fn(|row, col| {
                let mut dz = Vector15::zeros();
                dz[col] = step;
                let plus = predicted_measurement(&(StateElement::exp(&TangentVector(dz)) * x), &gyro, &foot);
                let minus = predicted_measurement(&(StateElement::exp(&TangentVector(-dz)) * x), &gyro, &foot);
                (plus[row] - minus[row]) / (2.0 * step)
            });
            assert_relative_eq!(analytic, numeric, epsilon = 1e-6);
        }
    }
}
