use super::metrics::{MetricsReport, TickError, TrialMetrics};
use super::{Dataset, FilterKind, HarnessError, TrialConfig};
use crate::filter::{BaselineState, Estimator, FilterConfig, FilterState, MeasurementKind};
use crate::lie::StateElement;
use crate::models::SensorFrame;
use crate::observability::{build_observability_from_states, ObservabilityReport, WindowSample};
use crate::sim::{inject_initial_error, GroundTruth};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn check_lengths(frames: &[SensorFrame], truth: &GroundTruth) -> Result<(), HarnessError> {
    if frames.is_empty() {
        return Err(HarnessError::Empty);
    }
    if truth.len() != frames.len() {
        return Err(HarnessError::Config(format!("{} truth rows for {} frames", truth.len(), frames.len())));
    }
    Ok(())
}

fn track<E: Estimator>(mut est: E, index: usize, frames: &[SensorFrame], truth: &GroundTruth, cfg: &TrialConfig, fc: &FilterConfig) -> TrialMetrics {
    let mut ticks = Vec::with_capacity(frames.len());
    let mut first_update = None;
    let mut diverged = None;
    let mut elapsed = 0.0;
    for (frame, x) in frames.iter().zip(&truth.states) {
        let start = Instant::now();
        let stepped = est.step(frame, fc);
        elapsed += start.elapsed().as_secs_f64();
        match stepped {
            Ok((next, report)) => {
                est = next;
                if first_update.is_none() && report.applied_updates() > 0 {
                    first_update = Some(frame.t);
                }
            }
            Err(e) => {
                diverged = Some(format!("t = {}: {e}", frame.t));
                break;
            }
        }
        let v = est.velocity();
        if !v.iter().all(|c| c.is_finite()) {
            diverged = Some(format!("t = {}: non-finite estimate", frame.t));
            break;
        }
        ticks.push(TickError::new(frame.t, &est.rotation(), &v, &x.r, &x.v));
    }
    let mut m = TrialMetrics::from_ticks(index, &ticks, cfg.initial_period, first_update, &cfg.convergence);
    m.mean_loop_seconds = elapsed / ticks.len().max(1) as f64;
    m.diverged = diverged;
    m
}

/// One trial: seeded initial error on the first truth state, then the
/// configured filter over the whole stream. Trial `i` draws from stream `i`
/// of the configured seed, so results do not depend on execution order.
pub fn run_trial(cfg: &TrialConfig, index: usize, frames: &[SensorFrame], truth: &GroundTruth) -> TrialMetrics {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let x0 = inject_initial_error(&truth.states[0], &cfg.errors, &mut rng);
    let fc = cfg.filter_config();
    let p0 = cfg.initial_covariance.matrix();
    let t0 = frames[0].t;
    match cfg.filter {
        FilterKind::Proposed => track(FilterState::new(x0, p0, t0), index, frames, truth, cfg, &fc),
        FilterKind::Baseline => track(BaselineState::new(x0.r, x0.v, x0.p, &p0, t0), index, frames, truth, cfg, &fc),
    }
}

pub fn run_trials_sequential(cfg: &TrialConfig, frames: &[SensorFrame], truth: &GroundTruth) -> Vec<TrialMetrics> {
    (0..cfg.n_trials).map(|i| run_trial(cfg, i, frames, truth)).collect()
}

#[cfg(feature = "parallel")]
pub fn run_trials_parallel(cfg: &TrialConfig, frames: &[SensorFrame], truth: &GroundTruth) -> Vec<TrialMetrics> {
    use rayon::prelude::*;
    (0..cfg.n_trials).into_par_iter().map(|i| run_trial(cfg, i, frames, truth)).collect()
}

pub fn run_battery(cfg: &TrialConfig, data: &Dataset) -> Result<MetricsReport, HarnessError> {
    cfg.validate()?;
    let truth = data.truth.as_ref().ok_or(HarnessError::MissingTruth)?;
    check_lengths(&data.frames, truth)?;
    #[cfg(feature = "parallel")]
    let trials = run_trials_parallel(cfg, &data.frames, truth);
    #[cfg(not(feature = "parallel"))]
    let trials = run_trials_sequential(cfg, &data.frames, truth);
    Ok(MetricsReport { filter: cfg.filter, measurement: cfg.measurement, motion: data.motion.clone(), trials, rates_filled: data.rates_filled })
}

/// One filled column of the summary table.
pub struct TableColumn<'a> {
    pub measurement: MeasurementKind,
    pub filter: FilterKind,
    pub report: &'a MetricsReport,
}

/// Averaged RMSEs laid out by period and variable, one column per
/// measurement/filter pair. Missing pairs are left blank.
pub fn table_csv(motion: &str, columns: &[TableColumn]) -> String {
    let pairs = [
        (MeasurementKind::Fk, FilterKind::Proposed),
        (MeasurementKind::Fk, FilterKind::Baseline),
        (MeasurementKind::Vec3, FilterKind::Proposed),
        (MeasurementKind::Vec3, FilterKind::Baseline),
    ];
    type Pick = fn(&MetricsReport) -> Option<f64>;
    let rows: [(&str, &str, &str, Pick); 4] = [
        ("Initial", "Stand", "V", MetricsReport::v_rmse_initial),
        ("Initial", "Stand", "O", MetricsReport::o_rmse_initial),
        ("Steady", motion, "V", MetricsReport::v_rmse_steady),
        ("Steady", motion, "O", MetricsReport::o_rmse_steady),
    ];
    let mut out = String::from("time_period,motion,variable,fk_proposed,fk_baseline,vec3_proposed,vec3_baseline\n");
    for (period, label, var, pick) in rows {
        out.push_str(&format!("{period},{label},{var}"));
        for (m, f) in pairs {
            let cell = columns.iter().find(|c| c.measurement == m && c.filter == f).and_then(|c| pick(c.report));
            out.push(',');
            if let Some(v) = cell {
                out.push_str(&format!("{v:.4}"));
            }
        }
        out.push('\n');
    }
    out
}

/// Consecutive non-overlapping windows of `window` contact ticks,
/// linearized along the truth when present. Without truth the proposed
/// filter is run from the first frame and its estimates are used.
pub fn observability_windows(data: &Dataset, cfg: &TrialConfig, window: usize) -> Result<Vec<(f64, ObservabilityReport)>, HarnessError> {
    if window < 2 {
        return Err(HarnessError::Config("window must hold at least 2 samples".into()));
    }
    let frames = &data.frames;
    if frames.is_empty() {
        return Err(HarnessError::Empty);
    }
    let fc = cfg.filter_config();
    let states: Vec<StateElement> = match &data.truth {
        Some(gt) => {
            check_lengths(frames, gt)?;
            gt.states.clone()
        }
        None => {
            let mut est = FilterState::new(StateElement::identity(), cfg.initial_covariance.matrix(), frames[0].t);
            let mut out = Vec::with_capacity(frames.len());
            for f in frames {
                est = est.step(f, &fc)?.0;
                out.push(est.x);
            }
            out
        }
    };
    let mut reports = Vec::new();
    let mut samples: Vec<WindowSample> = Vec::with_capacity(window);
    let mut start = 0.0;
    for k in 0..frames.len() - 1 {
        let f = &frames[k];
        let Some(leg) = f.legs.iter().find(|l| l.contact) else {
            samples.clear();
            continue;
        };
        let foot = match fc.measurement {
            MeasurementKind::Fk => fc.legs.chain(leg.leg).forward_kinematics(&leg.angles).map_err(crate::filter::FilterError::from)?,
            MeasurementKind::Vec3 => match leg.marker {
                Some(m) => m.position,
                None => fc.legs.chain(leg.leg).forward_kinematics(&leg.angles).map_err(crate::filter::FilterError::from)?,
            },
        };
        if samples.is_empty() {
            start = f.t;
        }
        samples.push(WindowSample { state: states[k], gyro: f.imu.gyro, foot, dt: frames[k + 1].t - f.t });
        if samples.len() == window {
            reports.push((start, build_observability_from_states(&samples, &fc.gravity)?));
            samples.clear();
        }
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{LegKinematics, NoiseConfig};
    use crate::observability::{Regime, StateBlock};
    use crate::sim::{generate, MotionProfile, Offsets};

    fn squat_with(noise: NoiseConfig) -> Dataset {
        let p = MotionProfile { duration: 8.0, standing_time: 2.0, ..MotionProfile::squat() };
        let (truth, frames) = generate(&p, &LegKinematics::default(), &Offsets::default(), &noise, 3).unwrap();
        Dataset { motion: Some("squat".into()), frames, truth: Some(truth), rates_filled: false }
    }

    fn short_squat() -> Dataset {
        squat_with(NoiseConfig::default())
    }

    fn strip_timing(mut v: Vec<TrialMetrics>) -> Vec<TrialMetrics> {
        v.iter_mut().for_each(|t| t.mean_loop_seconds = 0.0);
        v
    }

    #[test]
    fn battery_is_reproducible_and_order_independent() {
        let data = short_squat();
        let cfg = TrialConfig { n_trials: 4, initial_period: 2.0, ..TrialConfig::default() };
        let gt = data.truth.as_ref().unwrap();
        let a = strip_timing(run_trials_sequential(&cfg, &data.frames, gt));
        let b = strip_timing(run_battery(&cfg, &data).unwrap().trials);
        assert_eq!(a, b);
        let single = strip_timing(vec![run_trial(&cfg, 2, &data.frames, gt)]);
        assert_eq!(single[0], a[2]);
        assert_ne!(a[0].v_rmse_initial, a[1].v_rmse_initial);
    }

    #[test]
    fn missing_truth_is_an_error() {
        let mut data = short_squat();
        data.truth = None;
        assert_eq!(run_battery(&TrialConfig::default(), &data).unwrap_err(), HarnessError::MissingTruth);
    }

    #[test]
    fn table_layout() {
        let data = short_squat();
        let cfg = TrialConfig { n_trials: 1, initial_period: 2.0, ..TrialConfig::default() };
        let report = run_battery(&cfg, &data).unwrap();
        let text = table_csv("Squat", &[TableColumn { measurement: MeasurementKind::Fk, filter: FilterKind::Proposed, report: &report }]);
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("Initial,Stand,V,") && lines[1].ends_with(",,,"));
        assert!(lines[4].starts_with("Steady,Squat,O,"));
    }

    #[test]
    fn standing_windows_hide_offsets() {
        let data = squat_with(NoiseConfig::default().noiseless_sensors());
        let reports = observability_windows(&data, &TrialConfig::default(), 20).unwrap();
        let (t, first) = &reports[0];
        assert_eq!(*t, 0.0);
        assert_eq!(first.regime, Some(Regime::Stationary));
        assert_eq!(first.rank, 5);
        assert!(first.block(StateBlock::OffsetRotation).fully_unobservable());
        assert!(first.block(StateBlock::OffsetPosition).fully_unobservable());
        let moving = reports.iter().find(|(t, _)| *t > 3.0).unwrap();
        assert!(moving.1.rank > 5);
    }
}
