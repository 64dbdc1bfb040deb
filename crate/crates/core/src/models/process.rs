use crate::lie::{skew, Matrix15, Matrix9, StateElement};
use nalgebra::{Matrix3, Vector3};

pub const GRAVITY: Vector3<f64> = Vector3::new(0.0, 0.0, -9.81);

/// IMU input `u = (gyro, accel)` together with the world gravity vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessInput {
    pub gyro: Vector3<f64>,
    pub accel: Vector3<f64>,
    pub gravity: Vector3<f64>,
}

impl ProcessInput {
    pub fn new(gyro: Vector3<f64>, accel: Vector3<f64>) -> Self {
        Self { gyro, accel, gravity: GRAVITY }
    }
}

/// Deterministic dynamics `f_u(X)` as a 9x9 matrix: `R (gyro)x`, `R accel + g`
/// and `v` in the trunk columns, zero for the placement offset.
pub fn process_derivative(x: &StateElement, u: &ProcessInput) -> Matrix9 {
    let r = x.r.matrix();
    let mut d = Matrix9::zeros();
    d.fixed_view_mut::<3, 3>(0, 0).copy_from(&(r * skew(&u.gyro)));
    d.fixed_view_mut::<3, 1>(0, 3).copy_from(&(r * u.accel + u.gravity));
    d.fixed_view_mut::<3, 1>(0, 4).copy_from(&x.v);
    d
}

/// Log-error Jacobian `A`: `(g)x` in the (vel, rot) block and `I` in the
/// (pos, vel) block. Independent of state and input.
pub fn process_jacobian(gravity: &Vector3<f64>) -> Matrix15 {
    let mut a = Matrix15::zeros();
    a.fixed_view_mut::<3, 3>(3, 0).copy_from(&skew(gravity));
    a.fixed_view_mut::<3, 3>(6, 3).copy_from(&Matrix3::identity());
    a
}

/// `expm(A dt) = I + A dt + A^2 dt^2 / 2`, exact since `A^3 = 0`.
pub fn transition_matrix(dt: f64, gravity: &Vector3<f64>) -> Matrix15 {
    let mut phi = Matrix15::identity();
    let g = skew(gravity);
    phi.fixed_view_mut::<3, 3>(3, 0).copy_from(&(g * dt));
    phi.fixed_view_mut::<3, 3>(6, 0).copy_from(&(g * (0.5 * dt * dt)));
    phi.fixed_view_mut::<3, 3>(6, 3).copy_from(&(Matrix3::identity() * dt));
    phi
}
