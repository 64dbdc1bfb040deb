use super::{HarnessError, TrialConfig};
use crate::filter::{FilterError, FilterState};
use crate::lie::StateElement;
use crate::models::SensorFrame;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub p99: f64,
}

impl LoopStats {
    fn from_samples(mut s: Vec<f64>) -> Self {
        if s.is_empty() {
            return Self { count: 0, mean: 0.0, median: 0.0, p99: 0.0 };
        }
        s.sort_by(f64::total_cmp);
        let at = |q: f64| s[((s.len() - 1) as f64 * q).round() as usize];
        Self { count: s.len(), mean: s.iter().sum::<f64>() / s.len() as f64, median: at(0.5), p99: at(0.99) }
    }
}

/// Per-loop wall times of the offset-aware filter, seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingReport {
    pub propagate: LoopStats,
    /// All stance updates of one loop together.
    pub update: LoopStats,
    /// Loops that only propagated.
    pub propagate_only_loop: LoopStats,
    /// Loops with at least one update.
    pub full_loop: LoopStats,
    pub loops: LoopStats,
}

impl TimingReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("phase,count,mean_s,median_s,p99_s\n");
        for (name, s) in [
            ("propagate", self.propagate),
            ("update", self.update),
            ("propagate_only_loop", self.propagate_only_loop),
            ("full_loop", self.full_loop),
            ("loop", self.loops),
        ] {
            out.push_str(&format!("{name},{},{:e},{:e},{:e}\n", s.count, s.mean, s.median, s.p99));
        }
        out
    }
}

/// Replays `frames` through the proposed filter until at least
/// `min_loops` loops are timed. The filter restarts at the first frame on
/// each pass.
pub fn bench(cfg: &TrialConfig, frames: &[SensorFrame], min_loops: usize) -> Result<TimingReport, HarnessError> {
    if frames.len() < 2 {
        return Err(HarnessError::Empty);
    }
    let fc = cfg.filter_config();
    let p0 = cfg.initial_covariance.matrix();
    let (mut prop, mut upd, mut prop_only, mut full, mut all) = (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    while all.len() < min_loops {
        let mut state = FilterState::new(StateElement::identity(), p0, frames[0].t);
        state.last_imu = Some(frames[0].imu);
        for pair in frames.windows(2) {
            let (held, frame) = (&pair[0].imu, &pair[1]);
            let t0 = Instant::now();
            state = state.propagate(held, frame.t - state.t, &fc.noise, &fc.gravity)?;
            state.t = frame.t;
            state.last_imu = Some(frame.imu);
            let t1 = Instant::now();
            let mut updated = false;
            for joints in frame.legs.iter().filter(|j| j.contact) {
                let (meas, h) = state.measure(joints, &frame.imu, &fc)?;
                match state.update(&meas, &h) {
                    Ok(next) => state = next,
                    Err(FilterError::SingularInnovation { .. }) => {}
                    Err(e) => return Err(e.into()),
                }
                updated = true;
            }
            let t2 = Instant::now();
            let (p, u, l) = ((t1 - t0).as_secs_f64(), (t2 - t1).as_secs_f64(), (t2 - t0).as_secs_f64());
            prop.push(p);
            all.push(l);
            if updated {
                upd.push(u);
                full.push(l);
            } else {
                prop_only.push(l);
            }
        }
    }
    Ok(TimingReport {
        propagate: LoopStats::from_samples(prop),
        update: LoopStats::from_samples(upd),
        propagate_only_loop: LoopStats::from_samples(prop_only),
        full_loop: LoopStats::from_samples(full),
        loops: LoopStats::from_samples(all),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles() {
        let s = LoopStats::from_samples((1..=100).rev().map(f64::from).collect());
        assert_eq!((s.count, s.mean, s.median, s.p99), (100, 50.5, 51.0, 99.0));
    }
}
