//! Smooth trunk and foot paths evaluated on second-order jets, so positions,
//! velocities and accelerations come out of one evaluation.

use super::{MotionKind, MotionProfile};
use crate::models::Leg;
use nalgebra::{Matrix3, Vector3};
use num_dual::{Dual2_64, DualNum};
use std::f64::consts::PI;

pub(crate) type Jet = Dual2_64;

pub(crate) fn constant(x: f64) -> Jet {
    Jet::from_re(x)
}

pub(crate) fn time(t: f64) -> Jet {
    Jet::from_re(t).derivative()
}

/// Value, first and second derivative of a jet vector.
pub(crate) fn split3(v: &Vector3<Jet>) -> [Vector3<f64>; 3] {
    [v.map(|x| x.re), v.map(|x| x.v1), v.map(|x| x.v2)]
}

pub(crate) fn split33(m: &Matrix3<Jet>) -> [Matrix3<f64>; 3] {
    [m.map(|x| x.re), m.map(|x| x.v1), m.map(|x| x.v2)]
}

pub(crate) fn lift3(v: &Vector3<f64>) -> Vector3<Jet> {
    v.map(constant)
}

/// Quintic smoothstep clamped to [0, 1]; zero slope and curvature at both ends.
fn smoothstep(x: Jet) -> Jet {
    if x.re <= 0.0 {
        constant(0.0)
    } else if x.re >= 1.0 {
        constant(1.0)
    } else {
        x.powi(3) * (x * (x * 6.0 - 15.0) + 10.0)
    }
}

/// Integral of the smoothstep from 0 to x, continued linearly past 1.
fn smoothstep_integral(x: Jet) -> Jet {
    if x.re <= 0.0 {
        constant(0.0)
    } else if x.re >= 1.0 {
        x - 0.5
    } else {
        x.powi(4) * (x * (x - 3.0) + 2.5)
    }
}

pub(crate) fn euler_zyx(roll: Jet, pitch: Jet, yaw: Jet) -> Matrix3<Jet> {
    let (sr, cr) = (roll.sin(), roll.cos());
    let (sp, cp) = (pitch.sin(), pitch.cos());
    let (sy, cy) = (yaw.sin(), yaw.cos());
    let zero = constant(0.0);
    let one = constant(1.0);
    let rz = Matrix3::new(cy, -sy, zero, sy, cy, zero, zero, zero, one);
    let ry = Matrix3::new(cp, zero, sp, zero, one, zero, -sp, zero, cp);
    let rx = Matrix3::new(one, zero, zero, zero, cr, -sr, zero, sr, cr);
    rz * ry * rx
}

/// Contact schedule and foot path for one leg of a gait.
struct Gait {
    period: f64,
    start: f64,
    swing: f64,
    /// Phase at which this leg's first swing begins, in cycles.
    phase: f64,
}

impl Gait {
    /// Index and local time of the stance or swing segment containing `t`.
    /// Stance `-1` is the initial standing stance.
    fn locate(&self, t: f64) -> Segment {
        let first = self.start + self.phase * self.period;
        if t < first {
            return Segment::Stance { index: -1, since: t - first };
        }
        let cycles = ((t - first) / self.period).floor();
        let local = t - first - cycles * self.period;
        let index = cycles as i64;
        if local < self.swing * self.period {
            Segment::Swing { index, tau: local / (self.swing * self.period) }
        } else {
            Segment::Stance { index, since: local - self.swing * self.period }
        }
    }

    fn stance_start(&self, index: i64) -> f64 {
        self.start + (index as f64 + self.phase + self.swing) * self.period
    }

    fn stance_duration(&self) -> f64 {
        (1.0 - self.swing) * self.period
    }
}

enum Segment {
    Stance { index: i64, since: f64 },
    Swing { index: i64, tau: f64 },
}

/// Everything needed to evaluate the motion at any time.
pub(crate) struct Motion {
    pub profile: MotionProfile,
    pub stand_angles: Vec<f64>,
    /// Measurement-frame position and Euler angles at rest.
    pub base: Vector3<f64>,
    pub base_euler: Vector3<f64>,
    /// World positions of each sole at rest.
    pub feet0: [Vector3<f64>; 2],
}

impl Motion {
    fn envelope(&self, t: Jet) -> Jet {
        smoothstep((t - self.profile.standing_time) / self.profile.ramp())
    }

    /// Distance travelled along the progression direction at unit speed.
    fn progress(&self, t: Jet) -> Jet {
        let ramp = self.profile.ramp();
        smoothstep_integral((t - self.profile.standing_time) / ramp) * ramp
    }

    fn phase(&self, t: Jet) -> Jet {
        (t - self.profile.standing_time) * (2.0 * PI / self.profile.period)
    }

    fn speed(&self) -> f64 {
        match self.profile.kind {
            MotionKind::Squat => 0.0,
            MotionKind::Walk => 2.0 * self.profile.step_length / self.profile.period,
            MotionKind::Ladder => 2.0 * self.profile.rung_height / self.profile.period,
        }
    }

    fn progression(&self) -> Vector3<f64> {
        match self.profile.kind {
            MotionKind::Ladder => Vector3::z(),
            _ => Vector3::x(),
        }
    }

    /// Measurement-frame pose `(R_M, p_M)` in the world.
    pub fn pelvis(&self, t: Jet) -> (Matrix3<Jet>, Vector3<Jet>) {
        let env = self.envelope(t);
        let th = self.phase(t);
        let s = self.progress(t) * self.speed();
        let b = &self.base_euler;
        let (offset, euler) = match self.profile.kind {
            MotionKind::Squat => {
                let c = (constant(1.0) - th.cos()) * 0.5;
                let depth = self.profile.squat_depth;
                (
                    Vector3::new(c * -0.3 * depth, (th * 0.5 + 0.3).sin() * 0.01, c * -depth) * env,
                    Vector3::new((th * 0.7).sin() * 0.04, c * 0.35, (th * 0.45 + 1.0).sin() * 0.08) * env,
                )
            }
            MotionKind::Walk => (
                // Sway toward the stance foot; lowest in double support.
                Vector3::new(s, th.sin() * -0.03 * env, ((th * 2.0 - 0.8 * PI).cos() - 1.0) * 0.02 * env),
                Vector3::new(th.sin() * 0.04, (th * 2.0 + 0.5).sin() * 0.03, (th + 0.8).sin() * 0.06) * env,
            ),
            MotionKind::Ladder => (
                Vector3::new(th.sin() * 0.01 * env, th.sin() * -0.02 * env, s + (th * 2.0).cos() * 0.01 * env - env * 0.01),
                Vector3::new(th.sin() * 0.05, (th * 2.0).sin() * 0.05, (th + 0.4).sin() * 0.05) * env,
            ),
        };
        let r = euler_zyx(euler.x + b.x, euler.y + b.y, euler.z + b.z);
        (r, lift3(&self.base) + offset)
    }

    fn gait(&self, leg: Leg) -> Gait {
        Gait {
            period: self.profile.period,
            start: self.profile.standing_time,
            swing: 1.0 - self.profile.stance_fraction,
            phase: match leg {
                Leg::Left => 0.0,
                Leg::Right => 0.5,
            },
        }
    }

    /// Nominal pinned position for stance `index` of `leg`, before rolling.
    fn pin(&self, leg: Leg, index: i64) -> Vector3<f64> {
        let foot0 = self.feet0[leg.index()];
        if index < 0 {
            return foot0;
        }
        let gait = self.gait(leg);
        let mid = gait.stance_start(index) + 0.5 * gait.stance_duration();
        foot0 + self.progression() * (self.speed() * self.progress(constant(mid)).re)
    }

    /// Contact point during stance, moved along x when rolling contact is on.
    fn stance_point(&self, leg: Leg, index: i64, since: Jet) -> Vector3<Jet> {
        let pin = lift3(&self.pin(leg, index));
        match self.profile.rolling_contact {
            Some(rate) if index >= 0 => {
                let dur = self.gait(leg).stance_duration();
                let roll = (smoothstep(since / dur) - 0.5) * (rate * dur);
                pin + Vector3::new(roll, constant(0.0), constant(0.0))
            }
            _ => pin,
        }
    }

    /// World sole position and contact flag.
    pub fn foot(&self, leg: Leg, t: Jet) -> (Vector3<Jet>, bool) {
        if self.profile.kind == MotionKind::Squat {
            return (lift3(&self.feet0[leg.index()]), true);
        }
        let gait = self.gait(leg);
        match gait.locate(t.re) {
            Segment::Stance { index, since } => (self.stance_point(leg, index, t - t.re + since), true),
            Segment::Swing { index, tau } => {
                let dur = gait.swing * gait.period;
                let from = self.stance_point(leg, index - 1, constant(gait.stance_duration())).map(|x| x.re);
                let to = self.stance_point(leg, index, constant(0.0)).map(|x| x.re);
                let tau = (t - t.re) / dur + tau;
                let q = smoothstep(tau);
                let bump = (tau * (constant(1.0) - tau)).powi(3) * 64.0;
                let lift = match self.profile.kind {
                    MotionKind::Ladder => Vector3::new(bump * -0.08, constant(0.0), bump * 0.03),
                    _ => Vector3::new(constant(0.0), constant(0.0), bump * 0.08),
                };
                (lift3(&from) + lift3(&(to - from)) * q + lift, false)
            }
        }
    }

    /// Joints not solved by IK follow small oscillations about the rest pose.
    pub fn prescribed(&self, leg: Leg, index: usize, t: Jet) -> Jet {
        let env = self.envelope(t);
        let th = self.phase(t);
        let side = match leg {
            Leg::Left => 0.0,
            Leg::Right => PI,
        };
        let amp = [0.0, 0.0, 0.05, 0.0, 0.1, 0.03, 0.02, 0.01, 0.01];
        let freq = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 1.0, 1.0];
        let a = amp.get(index).copied().unwrap_or(0.0);
        let f = freq.get(index).copied().unwrap_or(1.0);
        (th * f + side + index as f64).sin() * env * a + self.stand_angles[index]
    }
}
