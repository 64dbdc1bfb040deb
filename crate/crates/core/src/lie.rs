//! Matrix Lie group machinery for SO(3) and the product group
//! `G = SE_2(3) x SE(3)` that houses the trunk state together with the IMU
//! placement offset.
//!
//! Storage is the five-field [`StateElement`]; the 9x9 matrix realization is
//! only produced on demand by [`StateElement::to_matrix`]. Tangent vectors are
//! ordered `(rot, vel, pos, offset_rot, offset_pos)`.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use std::ops::Mul;
use thiserror::Error;

pub type Matrix9 = SMatrix<f64, 9, 9>;
pub type Matrix15 = SMatrix<f64, 15, 15>;
pub type Vector15 = SVector<f64, 15>;

/// Below this rotation angle (rad) exp/log/Jacobians use second-order Taylor branches.
pub const SMALL_ANGLE: f64 = 1e-8;
/// Rotations drifting further than this from orthonormal (Frobenius) get re-projected.
pub const RENORMALIZE_THRESHOLD: f64 = 1e-7;
/// Logarithm refuses angles within this margin of pi.
pub const LOG_PI_MARGIN: f64 = 1e-6;

const ORTHONORMAL_TOL: f64 = 1e-9;
const ALGEBRA_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LieError {
    #[error("matrix is not a rotation (orthonormality error {orthogonality:.3e}, det {det:.12})")]
    NotARotation { orthogonality: f64, det: f64 },
    #[error("rotation angle {angle:.9} rad is too close to pi for a unique logarithm")]
    LogBranchAmbiguous { angle: f64 },
    #[error("matrix entry ({row}, {col}) = {value:.3e} violates the group/algebra sparsity pattern")]
    BadStructure { row: usize, col: usize, value: f64 },
}

/// Skew-symmetric matrix `(v)_x` such that `skew(a) * b == a.cross(&b)`.
#[inline]
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

#[inline]
pub fn unskew(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// Left Jacobian of SO(3) evaluated at the rotation vector `phi`.
pub fn so3_left_jacobian(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta = phi.norm();
    let k = skew(phi);
    if theta < SMALL_ANGLE {
        return Matrix3::identity() + 0.5 * k + (1.0 / 6.0) * k * k;
    }
    let t2 = theta * theta;
    Matrix3::identity() + ((1.0 - theta.cos()) / t2) * k + ((theta - theta.sin()) / (t2 * theta)) * k * k
}

/// Inverse of [`so3_left_jacobian`].
pub fn so3_left_jacobian_inv(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta = phi.norm();
    let k = skew(phi);
    if theta < SMALL_ANGLE {
        return Matrix3::identity() - 0.5 * k + (1.0 / 12.0) * k * k;
    }
    let half = 0.5 * theta;
    let coeff = (1.0 - half * half.cos() / half.sin()) / (theta * theta);
    Matrix3::identity() - 0.5 * k + coeff * k * k
}

/// Element of SO(3) stored as a 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation3(Matrix3<f64>);

impl Default for Rotation3 {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation3 {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Validates orthonormality and determinant to 1e-9.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, LieError> {
        let orthogonality = (m.transpose() * m - Matrix3::identity()).norm();
        let det = m.determinant();
        if !(orthogonality <= ORTHONORMAL_TOL && (det - 1.0).abs() <= ORTHONORMAL_TOL) {
            return Err(LieError::NotARotation { orthogonality, det });
        }
        Ok(Self(m))
    }

    /// Wraps `m` without checking it. Callers must guarantee it is a rotation.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    /// Nearest rotation in the Frobenius sense (polar projection).
    pub fn project(m: &Matrix3<f64>) -> Self {
        let svd = m.svd(true, true);
        let u = svd.u.expect("svd u requested");
        let v_t = svd.v_t.expect("svd v_t requested");
        let mut d = Matrix3::identity();
        if (u * v_t).determinant() < 0.0 {
            d[(2, 2)] = -1.0;
        }
        Self(u * d * v_t)
    }

    /// Rodrigues' formula.
    pub fn exp(phi: &Vector3<f64>) -> Self {
        let theta = phi.norm();
        let k = skew(phi);
        if theta < SMALL_ANGLE {
            return Self(Matrix3::identity() + k + 0.5 * k * k);
        }
        let t2 = theta * theta;
        Self(Matrix3::identity() + (theta.sin() / theta) * k + ((1.0 - theta.cos()) / t2) * k * k)
    }

    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        Self::exp(&(axis.normalize() * angle))
    }

    pub fn log(&self) -> Result<Vector3<f64>, LieError> {
        let m = &self.0;
        let w = 0.5 * unskew(&(m - m.transpose()));
        let cos = 0.5 * (m.trace() - 1.0);
        let sin = w.norm();
        let theta = sin.atan2(cos);
        if theta > std::f64::consts::PI - LOG_PI_MARGIN {
            return Err(LieError::LogBranchAmbiguous { angle: theta });
        }
        if theta < SMALL_ANGLE {
            // w = phi (1 - theta^2/6 + ...), so w is phi to second order.
            return Ok(w * (1.0 + theta * theta / 6.0));
        }
        Ok(w * (theta / sin))
    }

    /// Rotation angle in [0, pi].
    pub fn angle(&self) -> f64 {
        let w = 0.5 * unskew(&(self.0 - self.0.transpose()));
        w.norm().atan2(0.5 * (self.0.trace() - 1.0))
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    #[inline]
    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    #[inline]
    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    pub fn orthogonality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).norm()
    }

    pub fn needs_renormalization(&self) -> bool {
        self.orthogonality_error() > RENORMALIZE_THRESHOLD
    }

    /// Re-projects onto SO(3) when drift exceeds [`RENORMALIZE_THRESHOLD`].
    pub fn renormalized(self) -> Self {
        if self.needs_renormalization() {
            Self::project(&self.0)
        } else {
            self
        }
    }

    /// ZYX (yaw-pitch-roll) Euler angles `(roll, pitch, yaw)` in radians.
    pub fn euler_zyx(&self) -> (f64, f64, f64) {
        let m = &self.0;
        let pitch = (-m[(2, 0)]).clamp(-1.0, 1.0).asin();
        let roll = m[(2, 1)].atan2(m[(2, 2)]);
        let yaw = m[(1, 0)].atan2(m[(0, 0)]);
        (roll, pitch, yaw)
    }

    pub fn from_euler_zyx(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self::exp(&(Vector3::z() * yaw)) * Self::exp(&(Vector3::y() * pitch)) * Self::exp(&(Vector3::x() * roll))
    }
}

impl Mul for Rotation3 {
    type Output = Rotation3;
    #[inline]
    fn mul(self, rhs: Rotation3) -> Rotation3 {
        Rotation3(self.0 * rhs.0)
    }
}

impl Mul<Vector3<f64>> for Rotation3 {
    type Output = Vector3<f64>;
    #[inline]
    fn mul(self, rhs: Vector3<f64>) -> Vector3<f64> {
        self.0 * rhs
    }
}

impl Mul<&Vector3<f64>> for &Rotation3 {
    type Output = Vector3<f64>;
    #[inline]
    fn mul(self, rhs: &Vector3<f64>) -> Vector3<f64> {
        self.0 * rhs
    }
}

/// Tangent vector of `G`, blocks ordered `(rot, vel, pos, offset_rot, offset_pos)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentVector(pub Vector15);

macro_rules! block_accessor {
    ($name:ident, $offset:expr) => {
        #[inline]
        pub fn $name(&self) -> Vector3<f64> {
            self.0.fixed_rows::<3>($offset).into_owned()
        }
    };
}

impl TangentVector {
    pub const DIM: usize = 15;
    pub const ROT: usize = 0;
    pub const VEL: usize = 3;
    pub const POS: usize = 6;
    pub const OFFSET_ROT: usize = 9;
    pub const OFFSET_POS: usize = 12;

    pub fn zeros() -> Self {
        Self(Vector15::zeros())
    }

    pub fn from_blocks(rot: Vector3<f64>, vel: Vector3<f64>, pos: Vector3<f64>, offset_rot: Vector3<f64>, offset_pos: Vector3<f64>) -> Self {
        let mut z = Vector15::zeros();
        z.fixed_rows_mut::<3>(Self::ROT).copy_from(&rot);
        z.fixed_rows_mut::<3>(Self::VEL).copy_from(&vel);
        z.fixed_rows_mut::<3>(Self::POS).copy_from(&pos);
        z.fixed_rows_mut::<3>(Self::OFFSET_ROT).copy_from(&offset_rot);
        z.fixed_rows_mut::<3>(Self::OFFSET_POS).copy_from(&offset_pos);
        Self(z)
    }

    block_accessor!(rot, Self::ROT);
    block_accessor!(vel, Self::VEL);
    block_accessor!(pos, Self::POS);
    block_accessor!(offset_rot, Self::OFFSET_ROT);
    block_accessor!(offset_pos, Self::OFFSET_POS);

    #[inline]
    pub fn as_vector(&self) -> &Vector15 {
        &self.0
    }
}

impl From<Vector15> for TangentVector {
    fn from(v: Vector15) -> Self {
        Self(v)
    }
}

/// Lie-algebra matrix of `zeta`: `[(rot)x, vel, pos]` in the top-left 5x5
/// block, `[(offset_rot)x, offset_pos]` in the bottom-right 4x4 block.
pub fn wedge(zeta: &TangentVector) -> Matrix9 {
    let mut a = Matrix9::zeros();
    a.fixed_view_mut::<3, 3>(0, 0).copy_from(&skew(&zeta.rot()));
    a.fixed_view_mut::<3, 1>(0, 3).copy_from(&zeta.vel());
    a.fixed_view_mut::<3, 1>(0, 4).copy_from(&zeta.pos());
    a.fixed_view_mut::<3, 3>(5, 5).copy_from(&skew(&zeta.offset_rot()));
    a.fixed_view_mut::<3, 1>(5, 8).copy_from(&zeta.offset_pos());
    a
}

fn algebra_pattern(row: usize, col: usize) -> bool {
    (row < 3 && col < 5) || ((5..8).contains(&row) && col >= 5)
}

/// Inverse of [`wedge`]. Rejects matrices outside the algebra's sparsity
/// pattern or with non-skew rotation blocks.
pub fn vee(a: &Matrix9) -> Result<TangentVector, LieError> {
    for row in 0..9 {
        for col in 0..9 {
            if !algebra_pattern(row, col) && a[(row, col)].abs() > ALGEBRA_TOL {
                return Err(LieError::BadStructure { row, col, value: a[(row, col)] });
            }
        }
    }
    for base in [0usize, 5] {
        let block = a.fixed_view::<3, 3>(base, base).into_owned();
        let sym = block + block.transpose();
        for i in 0..3 {
            for j in 0..3 {
                if sym[(i, j)].abs() > ALGEBRA_TOL {
                    return Err(LieError::BadStructure { row: base + i, col: base + j, value: sym[(i, j)] });
                }
            }
        }
    }
    Ok(TangentVector::from_blocks(
        unskew(&a.fixed_view::<3, 3>(0, 0).into_owned()),
        a.fixed_view::<3, 1>(0, 3).into_owned(),
        a.fixed_view::<3, 1>(0, 4).into_owned(),
        unskew(&a.fixed_view::<3, 3>(5, 5).into_owned()),
        a.fixed_view::<3, 1>(5, 8).into_owned(),
    ))
}

/// Element of `G`: trunk orientation `r`, velocity `v` and position `p` in the
/// world frame plus the IMU placement offset `(dr, dp)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateElement {
    pub r: Rotation3,
    pub v: Vector3<f64>,
    pub p: Vector3<f64>,
    pub dr: Rotation3,
    pub dp: Vector3<f64>,
}

impl Default for StateElement {
    fn default() -> Self {
        Self::identity()
    }
}

impl StateElement {
    pub fn identity() -> Self {
        Self { r: Rotation3::identity(), v: Vector3::zeros(), p: Vector3::zeros(), dr: Rotation3::identity(), dp: Vector3::zeros() }
    }

    pub fn new(r: Rotation3, v: Vector3<f64>, p: Vector3<f64>, dr: Rotation3, dp: Vector3<f64>) -> Self {
        Self { r, v, p, dr, dp }
    }

    pub fn compose(&self, other: &StateElement) -> StateElement {
        StateElement {
            r: self.r * other.r,
            v: self.r.matrix() * other.v + self.v,
            p: self.r.matrix() * other.p + self.p,
            dr: self.dr * other.dr,
            dp: self.dr.matrix() * other.dp + self.dp,
        }
    }

    pub fn inverse(&self) -> StateElement {
        let rt = self.r.transpose();
        let drt = self.dr.transpose();
        StateElement { r: rt, v: -(rt * self.v), p: -(rt * self.p), dr: drt, dp: -(drt * self.dp) }
    }

    pub fn exp(zeta: &TangentVector) -> StateElement {
        let phi = zeta.rot();
        let jl = so3_left_jacobian(&phi);
        let phi_d = zeta.offset_rot();
        StateElement {
            r: Rotation3::exp(&phi),
            v: jl * zeta.vel(),
            p: jl * zeta.pos(),
            dr: Rotation3::exp(&phi_d),
            dp: so3_left_jacobian(&phi_d) * zeta.offset_pos(),
        }
    }

    pub fn log(&self) -> Result<TangentVector, LieError> {
        let phi = self.r.log()?;
        let phi_d = self.dr.log()?;
        let jl_inv = so3_left_jacobian_inv(&phi);
        Ok(TangentVector::from_blocks(phi, jl_inv * self.v, jl_inv * self.p, phi_d, so3_left_jacobian_inv(&phi_d) * self.dp))
    }

    /// `Ad_X` such that `Ad_X zeta = (X zeta^ X^-1)^v`. Block diagonal over
    /// the two factors of the product group.
    pub fn adjoint(&self) -> Matrix15 {
        let r = self.r.matrix();
        let dr = self.dr.matrix();
        let mut ad = Matrix15::zeros();
        for k in 0..3 {
            ad.fixed_view_mut::<3, 3>(3 * k, 3 * k).copy_from(r);
        }
        ad.fixed_view_mut::<3, 3>(3, 0).copy_from(&(skew(&self.v) * r));
        ad.fixed_view_mut::<3, 3>(6, 0).copy_from(&(skew(&self.p) * r));
        ad.fixed_view_mut::<3, 3>(9, 9).copy_from(dr);
        ad.fixed_view_mut::<3, 3>(12, 12).copy_from(dr);
        ad.fixed_view_mut::<3, 3>(12, 9).copy_from(&(skew(&self.dp) * dr));
        ad
    }

    /// The 9x9 matrix realization.
    pub fn to_matrix(&self) -> Matrix9 {
        let mut m = Matrix9::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(self.r.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.v);
        m.fixed_view_mut::<3, 1>(0, 4).copy_from(&self.p);
        m[(3, 3)] = 1.0;
        m[(4, 4)] = 1.0;
        m.fixed_view_mut::<3, 3>(5, 5).copy_from(self.dr.matrix());
        m.fixed_view_mut::<3, 1>(5, 8).copy_from(&self.dp);
        m[(8, 8)] = 1.0;
        m
    }

    /// Reads a 9x9 realization back, rejecting anything outside the group's
    /// block structure.
    pub fn from_matrix(m: &Matrix9) -> Result<StateElement, LieError> {
        for row in 0..9 {
            for col in 0..9 {
                let in_pattern = (row < 3 && col < 5) || ((5..8).contains(&row) && col >= 5);
                let expected_one = (row == col) && matches!(row, 3 | 4 | 8);
                let expected = if expected_one { 1.0 } else { 0.0 };
                if !in_pattern && (m[(row, col)] - expected).abs() > ALGEBRA_TOL {
                    return Err(LieError::BadStructure { row, col, value: m[(row, col)] });
                }
            }
        }
        Ok(StateElement {
            r: Rotation3::from_matrix(m.fixed_view::<3, 3>(0, 0).into_owned())?,
            v: m.fixed_view::<3, 1>(0, 3).into_owned(),
            p: m.fixed_view::<3, 1>(0, 4).into_owned(),
            dr: Rotation3::from_matrix(m.fixed_view::<3, 3>(5, 5).into_owned())?,
            dp: m.fixed_view::<3, 1>(5, 8).into_owned(),
        })
    }

    pub fn renormalized(self) -> Self {
        Self { r: self.r.renormalized(), dr: self.dr.renormalized(), ..self }
    }
}

impl Mul for StateElement {
    type Output = StateElement;
    fn mul(self, rhs: StateElement) -> StateElement {
        self.compose(&rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    /// Truncated Taylor series of the matrix exponential, independent of the
    /// closed forms under test.
    fn expm_series(a: &Matrix9, terms: usize) -> Matrix9 {
        let mut sum = Matrix9::identity();
        let mut term = Matrix9::identity();
        for k in 1..terms {
            term = term * a / k as f64;
            sum += term;
        }
        sum
    }

    fn random_tangent(rng: &mut impl Rng, scale: f64) -> TangentVector {
        TangentVector(Vector15::from_fn(|_, _| rng.random_range(-scale..scale)))
    }

    fn random_rotvec(rng: &mut impl Rng, max_angle: f64) -> Vector3<f64> {
        let axis = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)).normalize();
        axis * rng.random_range(0.0..max_angle)
    }

    #[test]
    fn wedge_of_zero_is_zero() {
        assert_eq!(wedge(&TangentVector::zeros()), Matrix9::zeros());
        assert_eq!(vee(&Matrix9::zeros()).unwrap(), TangentVector::zeros());
    }

    #[test]
    fn wedge_z_rotation_is_skew() {
        let mut z = TangentVector::zeros();
        z.0[2] = 1.0;
        let a = wedge(&z);
        assert_eq!(a[(0, 1)], -1.0);
        assert_eq!(a[(1, 0)], 1.0);
    }

    #[test]
    fn vee_extracts_velocity_column() {
        let mut a = Matrix9::zeros();
        a[(0, 3)] = 1.0;
        a[(1, 3)] = 2.0;
        a[(2, 3)] = 3.0;
        assert_eq!(vee(&a).unwrap().vel(), Vector3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn vee_rejects_entries_outside_pattern() {
        let mut a = Matrix9::zeros();
        a[(3, 0)] = 1e-6;
        assert!(matches!(vee(&a), Err(LieError::BadStructure { row: 3, col: 0, .. })));
        let mut b = Matrix9::zeros();
        b[(0, 1)] = 1.0; // not skew without (1,0) = -1
        assert!(vee(&b).is_err());
    }

    #[test]
    fn vee_inverts_wedge() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let z = random_tangent(&mut rng, 5.0);
            assert_eq!(vee(&wedge(&z)).unwrap(), z);
        }
    }

    #[test]
    fn exp_of_zero_is_identity() {
        assert_eq!(StateElement::exp(&TangentVector::zeros()), StateElement::identity());
    }

    #[test]
    fn exp_quarter_turn_about_z_matches_series() {
        let mut z = TangentVector::zeros();
        z.0[2] = FRAC_PI_2;
        let x = StateElement::exp(&z);
        let oracle = expm_series(&wedge(&z), 30);
        assert_relative_eq!(x.to_matrix(), oracle, epsilon = 1e-12);
        let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert_relative_eq!(*x.r.matrix(), expected, epsilon = 1e-12);
    }

    #[test]
    fn exp_pure_offset_translation() {
        let mut z = TangentVector::zeros();
        z.0[12] = 1.0;
        let x = StateElement::exp(&z);
        assert_relative_eq!(x.to_matrix(), expm_series(&wedge(&z), 30), epsilon = 1e-14);
        assert_eq!(x.dp, Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(x.r, Rotation3::identity());
        assert_eq!(x.dr, Rotation3::identity());
        assert_eq!(x.v, Vector3::zeros());
    }

    #[test]
    fn exp_matches_series_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let z = random_tangent(&mut rng, 0.8);
            let oracle = expm_series(&wedge(&z), 40);
            assert_relative_eq!(StateElement::exp(&z).to_matrix(), oracle, epsilon = 1e-9);
        }
    }

    #[test]
    fn exp_small_angle_branch_matches_series() {
        let mut z = TangentVector::zeros();
        z.0[0] = 3e-9;
        z.0[1] = -2e-9;
        z.0[4] = 0.7;
        z.0[10] = 1e-9;
        z.0[13] = -0.4;
        assert_relative_eq!(StateElement::exp(&z).to_matrix(), expm_series(&wedge(&z), 20), epsilon = 1e-15);
    }

    #[test]
    fn log_of_identity_is_zero() {
        assert_eq!(StateElement::identity().log().unwrap(), TangentVector::zeros());
    }

    #[test]
    fn log_of_quarter_turn() {
        // Oracle: bisection on the angle of the series exponential about z.
        let target = Rotation3::from_matrix(Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0)).unwrap();
        let (mut lo, mut hi) = (0.0_f64, 3.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let mut z = TangentVector::zeros();
            z.0[2] = mid;
            let m = expm_series(&wedge(&z), 40);
            // sin(angle) is m[(1,0)]; it increases until pi/2 then cos goes negative.
            if m[(0, 0)] > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x = StateElement { r: target, ..StateElement::identity() };
        let z = x.log().unwrap();
        assert_relative_eq!(z.rot(), Vector3::new(0.0, 0.0, 0.5 * (lo + hi)), epsilon = 1e-12);
    }

    #[test]
    fn log_rejects_angle_near_pi() {
        let r = Rotation3::exp(&Vector3::new(0.0, std::f64::consts::PI - 1e-7, 0.0));
        assert!(matches!(r.log(), Err(LieError::LogBranchAmbiguous { .. })));
        let x = StateElement { dr: r, ..StateElement::identity() };
        assert!(x.log().is_err());
    }

    #[test]
    fn exp_log_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let mut z = random_tangent(&mut rng, 1.0);
            z.0.fixed_rows_mut::<3>(0).copy_from(&random_rotvec(&mut rng, 3.0));
            z.0.fixed_rows_mut::<3>(9).copy_from(&random_rotvec(&mut rng, 3.0));
            let back = StateElement::exp(&z).log().unwrap();
            assert_relative_eq!(back.0, z.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn adjoint_of_identity() {
        assert_eq!(StateElement::identity().adjoint(), Matrix15::identity());
    }

    #[test]
    fn adjoint_defining_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let x = StateElement::exp(&random_tangent(&mut rng, 2.0));
            let z = random_tangent(&mut rng, 2.0);
            let conj = x.to_matrix() * wedge(&z) * x.inverse().to_matrix();
            let expected = vee(&conj.map(|e| if e.abs() < 1e-13 { 0.0 } else { e })).unwrap();
            assert_relative_eq!(x.adjoint() * z.0, expected.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn adjoint_rotation_only_leaves_offset_blocks() {
        let r = Rotation3::exp(&Vector3::new(0.3, -0.2, 0.9));
        let x = StateElement { r, ..StateElement::identity() };
        let z = TangentVector::from_blocks(
            Vector3::new(1.0, 2.0, 3.0),
            Vector3::new(-1.0, 0.5, 0.0),
            Vector3::new(0.0, 0.0, 1.0),
            Vector3::new(0.4, 0.5, 0.6),
            Vector3::new(-0.7, 0.8, 0.9),
        );
        let numeric = vee(&(x.to_matrix() * wedge(&z) * x.inverse().to_matrix())).unwrap();
        let mapped = TangentVector(x.adjoint() * z.0);
        assert_relative_eq!(mapped.0, numeric.0, epsilon = 1e-12);
        assert_relative_eq!(mapped.rot(), r * z.rot(), epsilon = 1e-12);
        assert_eq!(mapped.offset_rot(), z.offset_rot());
        assert_eq!(mapped.offset_pos(), z.offset_pos());
    }

    #[test]
    fn compose_inverse_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = StateElement::exp(&random_tangent(&mut rng, 2.0));
        let e = x.compose(&x.inverse());
        assert_relative_eq!(e.to_matrix(), Matrix9::identity(), epsilon = 1e-12);
        assert_eq!(StateElement::identity().compose(&x), x);
    }

    #[test]
    fn compose_velocity_block_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x1 = StateElement::exp(&random_tangent(&mut rng, 1.0));
        let x2 = StateElement::exp(&random_tangent(&mut rng, 1.0));
        let x12 = x1 * x2;
        assert_relative_eq!(x12.v, x1.r * x2.v + x1.v, epsilon = 1e-15);
        assert_relative_eq!(x12.to_matrix(), x1.to_matrix() * x2.to_matrix(), epsilon = 1e-12);
    }

    #[test]
    fn composition_keeps_zero_blocks_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x1 = StateElement::exp(&random_tangent(&mut rng, 1.0));
        let x2 = StateElement::exp(&random_tangent(&mut rng, 1.0));
        for m in [(x1 * x2).to_matrix(), x1.inverse().to_matrix()] {
            for row in 0..9 {
                for col in 0..9 {
                    let free = (row < 3 && col < 5) || ((5..8).contains(&row) && col >= 5);
                    if !free {
                        let expected = if row == col { 1.0 } else { 0.0 };
                        assert_eq!(m[(row, col)], expected);
                    }
                }
            }
        }
    }

    #[test]
    fn long_composition_chain_stays_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let steps: Vec<Rotation3> = (0..64).map(|_| Rotation3::exp(&random_rotvec(&mut rng, 3.0))).collect();
        let mut r = Rotation3::identity();
        for i in 0..1_000_000 {
            r = (r * steps[i % steps.len()]).renormalized();
        }
        assert!(r.orthogonality_error() <= RENORMALIZE_THRESHOLD);
        assert!((r.matrix().determinant() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn from_matrix_validates() {
        assert!(Rotation3::from_matrix(Matrix3::identity() * 1.001).is_err());
        let reflect = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert!(Rotation3::from_matrix(reflect).is_err());
        let mut m = Matrix9::identity();
        m[(3, 0)] = 0.5;
        assert!(StateElement::from_matrix(&m).is_err());
        let x = StateElement::exp(&TangentVector(Vector15::from_fn(|i, _| 0.1 * i as f64)));
        assert_relative_eq!(StateElement::from_matrix(&x.to_matrix()).unwrap().to_matrix(), x.to_matrix());
    }

    #[test]
    fn euler_round_trip() {
        let r = Rotation3::from_euler_zyx(0.1, -0.2, 0.3);
        let (roll, pitch, yaw) = r.euler_zyx();
        assert_relative_eq!(roll, 0.1, epsilon = 1e-14);
        assert_relative_eq!(pitch, -0.2, epsilon = 1e-14);
        assert_relative_eq!(yaw, 0.3, epsilon = 1e-14);
    }

    #[test]
    fn projection_recovers_rotation() {
        let r = Rotation3::exp(&Vector3::new(0.2, 0.4, -0.1));
        let noisy = r.matrix() + Matrix3::from_element(1e-6);
        let p = Rotation3::project(&noisy);
        assert!(p.orthogonality_error() < 1e-14);
        assert_relative_eq!(*p.matrix(), *r.matrix(), epsilon = 1e-5);
    }
}
