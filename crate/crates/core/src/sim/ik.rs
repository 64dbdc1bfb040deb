//! Position-only leg IK: hip flexion, hip abduction and knee flexion are
//! solved so the sole lands on a target; the rest are prescribed.

use crate::models::{KinematicChain, ModelError};
use nalgebra::{DVector, Matrix3, Vector3};

const MAX_ITERATIONS: usize = 50;
const TOLERANCE: f64 = 1e-13;

/// Indices of the joints IK solves for.
pub(crate) fn solved_joints(chain: &KinematicChain) -> [usize; 3] {
    [0, 1, chain.knee_index()]
}

fn sub_jacobian(jac: &crate::models::FkJacobian, idx: &[usize; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|r, c| jac[(r, idx[c])])
}

/// Newton iterations from `angles`, which also carries the prescribed
/// values. Returns false when the target is out of reach or the knee
/// hyperextends.
pub(crate) fn solve(chain: &KinematicChain, target: &Vector3<f64>, angles: &mut [f64]) -> Result<bool, ModelError> {
    let idx = solved_joints(chain);
    for _ in 0..MAX_ITERATIONS {
        let (foot, jac) = chain.fk_with_jacobian(angles)?;
        let residual = target - foot;
        if residual.norm() < TOLERANCE {
            return Ok(angles[idx[2]] > 0.0);
        }
        let Some(step) = sub_jacobian(&jac, &idx).lu().solve(&residual) else {
            return Ok(false);
        };
        // Damp long steps so a poor warm start does not flip the knee.
        let scale = (0.3 / step.amax()).min(1.0);
        for (k, &i) in idx.iter().enumerate() {
            angles[i] += scale * step[k];
        }
    }
    let foot = chain.forward_kinematics(angles)?;
    Ok((target - foot).norm() < 1e-10 && angles[idx[2]] > 0.0)
}

/// Joint rates reproducing `foot_velocity` given the prescribed rates
/// already stored in `rates`.
pub(crate) fn rates(chain: &KinematicChain, angles: &[f64], foot_velocity: &Vector3<f64>, rates: &mut [f64]) -> Result<bool, ModelError> {
    let idx = solved_joints(chain);
    let jac = chain.fk_jacobian(angles)?;
    for &i in &idx {
        rates[i] = 0.0;
    }
    let rhs = foot_velocity - &jac * DVector::from_column_slice(rates);
    match sub_jacobian(&jac, &idx).lu().solve(&rhs) {
        Some(sol) => {
            for (k, &i) in idx.iter().enumerate() {
                rates[i] = sol[k];
            }
            Ok(true)
        }
        None => Ok(false),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_known_pose() {
        let chain = KinematicChain::default_left();
        let truth = [0.3, 0.1, 0.05, 0.8, 0.2, -0.05, 0.02];
        let target = chain.forward_kinematics(&truth).unwrap();
        let mut guess = truth;
        guess[0] = 0.1;
        guess[1] = 0.0;
        guess[3] = 0.4;
        assert!(solve(&chain, &target, &mut guess).unwrap());
        for (a, b) in guess.iter().zip(truth) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn rates_reproduce_foot_velocity() {
        let chain = KinematicChain::default_right();
        let angles = [0.2, -0.05, 0.1, 0.6, 0.1, 0.02, 0.0];
        let mut r = vec![0.0, 0.0, 0.3, 0.0, -0.2, 0.1, 0.05];
        let v = Vector3::new(0.1, -0.2, 0.3);
        assert!(rates(&chain, &angles, &v, &mut r).unwrap());
        let jac = chain.fk_jacobian(&angles).unwrap();
        assert!((jac * DVector::from_column_slice(&r) - v).norm() < 1e-12);
    }

    #[test]
    fn unreachable_target_fails() {
        let chain = KinematicChain::default_left();
        let mut a = [0.1, 0.0, 0.0, 0.3, 0.0, 0.0, 0.0];
        assert!(!solve(&chain, &Vector3::new(0.0, 0.1, -3.0), &mut a).unwrap());
    }
}
