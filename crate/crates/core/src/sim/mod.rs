//! Synthetic ground truth and sensor streams for squatting, walking and
//! ladder climbing.
//!
//! The measurement-frame (pelvis) path and the world sole paths are smooth
//! closed-form functions of time. Leg angles follow by IK against the pinned
//! or swinging soles, and the IMU pose is the pelvis pose composed with the
//! placement offset: `R = R_M dR`, `p = p_M - R_M dp`.

mod ik;
mod trajectory;

use crate::lie::{unskew, Rotation3, StateElement};
use crate::models::{ImuSample, JointSample, Leg, LegKinematics, MarkerVector, ModelError, NoiseConfig, SensorFrame, GRAVITY};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;
use trajectory::{split3, split33, time, Motion};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid motion profile: {0}")]
    InvalidProfile(String),
    #[error("no foot in contact at t = {t:.4} s")]
    Airborne { t: f64 },
    #[error("{leg} sole target unreachable at t = {t:.4} s")]
    Unreachable { leg: Leg, t: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotionKind {
    Squat,
    Walk,
    Ladder,
}

impl std::str::FromStr for MotionKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "squat" => Ok(Self::Squat),
            "walk" => Ok(Self::Walk),
            "ladder" => Ok(Self::Ladder),
            other => Err(format!("unknown motion `{other}` (expected squat, walk or ladder)")),
        }
    }
}

impl fmt::Display for MotionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Squat => "squat",
            Self::Walk => "walk",
            Self::Ladder => "ladder",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionProfile {
    pub kind: MotionKind,
    /// Squat or gait cycle, s.
    pub period: f64,
    pub squat_depth: f64,
    /// Forward distance per step, m; two steps per cycle.
    pub step_length: f64,
    /// Rise per step on the ladder, m.
    pub rung_height: f64,
    pub duration: f64,
    pub imu_rate: f64,
    pub joint_rate: f64,
    /// Quiet standing before the motion ramps in, s.
    pub standing_time: f64,
    /// Fraction of the cycle each foot is on the ground (gaits only).
    pub stance_fraction: f64,
    /// Sliding speed of the contact point during stance, m/s.
    pub rolling_contact: Option<f64>,
}

impl Default for MotionProfile {
    fn default() -> Self {
        Self::squat()
    }
}

impl MotionProfile {
    pub fn squat() -> Self {
        Self {
            kind: MotionKind::Squat,
            period: 4.0,
            squat_depth: 0.25,
            step_length: 0.3,
            rung_height: 0.3,
            duration: 90.0,
            imu_rate: 400.0,
            joint_rate: 100.0,
            standing_time: 5.0,
            stance_fraction: 0.6,
            rolling_contact: None,
        }
    }

    pub fn walk() -> Self {
        Self { kind: MotionKind::Walk, period: 1.2, duration: 60.0, ..Self::squat() }
    }

    pub fn ladder() -> Self {
        Self { kind: MotionKind::Ladder, period: 2.0, rung_height: 0.25, duration: 60.0, ..Self::squat() }
    }

    pub fn of_kind(kind: MotionKind) -> Self {
        match kind {
            MotionKind::Squat => Self::squat(),
            MotionKind::Walk => Self::walk(),
            MotionKind::Ladder => Self::ladder(),
        }
    }

    /// Length of the smooth ramp from standing to full motion.
    pub fn ramp(&self) -> f64 {
        self.period
    }

    /// IMU ticks per joint sample.
    pub fn joint_decimation(&self) -> usize {
        (self.imu_rate / self.joint_rate).round() as usize
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidProfile(m.to_string()));
        if !(self.period > 0.0 && self.duration > 0.0) {
            return bad("period and duration must be positive");
        }
        if !(self.imu_rate > 0.0 && self.joint_rate > 0.0 && self.joint_rate <= self.imu_rate) {
            return bad("rates must be positive with joint_rate <= imu_rate");
        }
        let ratio = self.imu_rate / self.joint_rate;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return bad("imu_rate must be an integer multiple of joint_rate");
        }
        if !(self.standing_time >= 0.0 && self.squat_depth >= 0.0 && self.step_length >= 0.0 && self.rung_height >= 0.0) {
            return bad("lengths and standing time must be non-negative");
        }
        if !(self.stance_fraction > 0.0 && self.stance_fraction < 1.0) {
            return bad("stance_fraction must lie in (0, 1)");
        }
        if self.rolling_contact.is_some_and(|r| !r.is_finite()) {
            return bad("rolling_contact must be finite");
        }
        Ok(())
    }
}

/// IMU placement relative to the measurement frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Offsets {
    pub dr: Rotation3,
    pub dp: Vector3<f64>,
}

impl Default for Offsets {
    /// 10 degrees about a skew axis, (2, 1, 5) cm.
    fn default() -> Self {
        Self::new(10.0, Vector3::new(0.02, 0.01, 0.05))
    }
}

impl Offsets {
    pub fn zero() -> Self {
        Self { dr: Rotation3::identity(), dp: Vector3::zeros() }
    }

    /// Rotation of `degrees` about the default skew axis.
    pub fn new(degrees: f64, dp: Vector3<f64>) -> Self {
        let axis = Vector3::new(1.0, -1.0, 1.0).normalize();
        Self { dr: Rotation3::exp(&(axis * degrees.to_radians())), dp }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LegTruth {
    pub angles: Vec<f64>,
    pub rates: Vec<f64>,
    /// Sole position in the measurement frame, `d^M`.
    pub foot: Vector3<f64>,
    /// Its time derivative, `v^M`.
    pub foot_velocity: Vector3<f64>,
    pub foot_world: Vector3<f64>,
    pub contact: bool,
}

/// Per-tick true IMU state. `legs` is empty when truth comes from a file
/// that only carries the state columns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub t: Vec<f64>,
    pub states: Vec<StateElement>,
    pub legs: Vec<[LegTruth; 2]>,
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Uniform initial-error bounds: per-axis velocity (m/s) and per-axis
/// rotation vector (degrees).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErrorRanges {
    pub velocity: f64,
    pub rotation_deg: f64,
}

impl Default for ErrorRanges {
    fn default() -> Self {
        Self { velocity: 1.0, rotation_deg: 20.0 }
    }
}

/// Perturbed initial estimate: velocity offset and left rotation drawn
/// uniformly per axis; the placement offset starts unknown.
pub fn inject_initial_error(truth: &StateElement, ranges: &ErrorRanges, rng: &mut impl Rng) -> StateElement {
    let mut uniform = |half: f64| if half > 0.0 { rng.random_range(-half..=half) } else { 0.0 };
    let dv = Vector3::new(uniform(ranges.velocity), uniform(ranges.velocity), uniform(ranges.velocity));
    let half = ranges.rotation_deg.to_radians();
    let phi = Vector3::new(uniform(half), uniform(half), uniform(half));
    StateElement { r: Rotation3::exp(&phi) * truth.r, v: truth.v + dv, p: truth.p, dr: Rotation3::identity(), dp: Vector3::zeros() }
}

fn gaussian(rng: &mut impl Rng, sd: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    z * sd
}

fn gaussian3(rng: &mut impl Rng, sd: f64) -> Vector3<f64> {
    Vector3::new(gaussian(rng, sd), gaussian(rng, sd), gaussian(rng, sd))
}

fn rest_angles(kind: MotionKind, dof: usize, knee: usize, ankle: usize) -> Vec<f64> {
    let (hip, abd, k, a) = match kind {
        MotionKind::Squat => (0.2, 0.05, 0.5, 0.25),
        MotionKind::Walk => (0.25, 0.0, 0.7, 0.3),
        MotionKind::Ladder => (0.9, 0.05, 1.4, 0.35),
    };
    let mut angles = vec![0.0; dof];
    angles[0] = hip;
    angles[1] = abd;
    angles[knee] = k;
    angles[ankle] = a;
    angles
}

fn build_motion(profile: &MotionProfile, legs: &LegKinematics) -> Result<Motion, SimError> {
    let left = &legs.left;
    let stand = rest_angles(profile.kind, left.dof(), left.knee_index(), left.ankle_index());
    let pitch0 = if profile.kind == MotionKind::Ladder { 0.15 } else { 0.0 };
    let base_euler = Vector3::new(0.0, pitch0, 0.0);
    let r0 = Rotation3::from_euler_zyx(0.0, pitch0, 0.0);
    let d_left = r0 * legs.left.forward_kinematics(&stand)?;
    let d_right = r0 * legs.right.forward_kinematics(&stand)?;
    let base = Vector3::new(0.0, 0.0, -d_left.z.min(d_right.z));
    Ok(Motion { profile: *profile, stand_angles: stand, base, base_euler, feet0: [base + d_left, base + d_right] })
}

/// Generates truth at every IMU tick and the matching sensor stream.
/// Joint samples are refreshed at `joint_rate` and held in between.
pub fn generate(
    profile: &MotionProfile,
    legs: &LegKinematics,
    offsets: &Offsets,
    noise: &NoiseConfig,
    seed: u64,
) -> Result<(GroundTruth, Vec<SensorFrame>), SimError> {
    profile.validate()?;
    legs.validate()?;
    noise.validate().map_err(SimError::InvalidProfile)?;
    let motion = build_motion(profile, legs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ticks = (profile.duration * profile.imu_rate).round() as usize;
    let decimation = profile.joint_decimation();
    let dr = offsets.dr.matrix();

    let mut truth = GroundTruth::default();
    let mut frames = Vec::with_capacity(ticks + 1);
    let mut warm = [motion.stand_angles.clone(), motion.stand_angles.clone()];
    let mut held: Option<[JointSample; 2]> = None;

    for i in 0..=ticks {
        let t = i as f64 / profile.imu_rate;
        let tj = time(t);
        let (rm_jet, pm_jet) = motion.pelvis(tj);
        let [rm, rm_dot, rm_ddot] = split33(&rm_jet);
        let [pm, pm_dot, pm_ddot] = split3(&pm_jet);
        let r_imu = Rotation3::project(&(rm * dr));
        let state = StateElement { r: r_imu, v: pm_dot - rm_dot * offsets.dp, p: pm - rm * offsets.dp, dr: offsets.dr, dp: offsets.dp };
        let omega_hat = r_imu.matrix().transpose() * rm_dot * dr;
        let gyro = unskew(&((omega_hat - omega_hat.transpose()) * 0.5));
        let accel = r_imu.matrix().transpose() * (pm_ddot - rm_ddot * offsets.dp - GRAVITY);

        let mut leg_truth = Vec::with_capacity(2);
        for leg in Leg::BOTH {
            let chain = legs.chain(leg);
            let (world, contact) = motion.foot(leg, tj);
            let rel = rm_jet.transpose() * (world - pm_jet);
            let [foot, foot_velocity, _] = split3(&rel);
            let angles = &mut warm[leg.index()];
            let mut rates = vec![0.0; angles.len()];
            let solved = ik::solved_joints(chain);
            for j in (0..angles.len()).filter(|j| !solved.contains(j)) {
                let q = motion.prescribed(leg, j, tj);
                angles[j] = q.re;
                rates[j] = q.v1;
            }
            if !ik::solve(chain, &foot, angles)? || !ik::rates(chain, angles, &foot_velocity, &mut rates)? {
                return Err(SimError::Unreachable { leg, t });
            }
            leg_truth.push(LegTruth { angles: angles.clone(), rates, foot, foot_velocity, foot_world: split3(&world)[0], contact });
        }
        if !leg_truth.iter().any(|l| l.contact) {
            return Err(SimError::Airborne { t });
        }
        let legs_now: [LegTruth; 2] = leg_truth.try_into().expect("two legs");

        if i % decimation == 0 || held.is_none() {
            let sample = |leg: Leg, rng: &mut ChaCha8Rng| {
                let lt = &legs_now[leg.index()];
                JointSample {
                    t,
                    leg,
                    angles: lt.angles.iter().map(|a| a + gaussian(rng, noise.sd_joint_angle)).collect(),
                    rates: lt.rates.iter().map(|a| a + gaussian(rng, noise.sd_joint_rate)).collect(),
                    contact: lt.contact,
                    marker: Some(MarkerVector {
                        position: lt.foot + gaussian3(rng, noise.sd_marker_pos),
                        velocity: lt.foot_velocity + gaussian3(rng, noise.sd_marker_vel),
                    }),
                }
            };
            held = Some([sample(Leg::Left, &mut rng), sample(Leg::Right, &mut rng)]);
        }
        let imu = ImuSample { t, accel: accel + gaussian3(&mut rng, noise.sd_accel), gyro: gyro + gaussian3(&mut rng, noise.sd_gyro) };
        frames.push(SensorFrame { t, imu, legs: held.clone().expect("set above") });

        truth.t.push(t);
        truth.states.push(state);
        truth.legs.push(legs_now);
    }
    Ok((truth, frames))
}
