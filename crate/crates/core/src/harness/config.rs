use super::HarnessError;
use crate::filter::{FilterConfig, FootInit, InitialCovariance, MeasurementKind};
use crate::models::{LegKinematics, NoiseConfig, GRAVITY};
use crate::sim::ErrorRanges;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Proposed,
    Baseline,
}

impl std::str::FromStr for FilterKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "proposed" => Ok(Self::Proposed),
            "baseline" => Ok(Self::Baseline),
            other => Err(format!("unknown filter `{other}` (expected proposed or baseline)")),
        }
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Proposed => "proposed",
            Self::Baseline => "baseline",
        })
    }
}

/// Velocity-error norm must stay below `threshold` for `hold` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Convergence {
    pub threshold: f64,
    pub hold: f64,
}

impl Default for Convergence {
    fn default() -> Self {
        Self { threshold: 0.1, hold: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialConfig {
    pub filter: FilterKind,
    pub measurement: MeasurementKind,
    pub n_trials: usize,
    pub seed: u64,
    /// Samples before this time count toward the initial-period RMSE, s.
    pub initial_period: f64,
    pub errors: ErrorRanges,
    pub convergence: Convergence,
    pub noise: NoiseConfig,
    pub initial_covariance: InitialCovariance,
    pub foot_init: FootInit,
    pub gravity: Vector3<f64>,
    pub legs: LegKinematics,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            filter: FilterKind::Proposed,
            measurement: MeasurementKind::Fk,
            n_trials: 50,
            seed: 0,
            initial_period: 5.0,
            errors: ErrorRanges::default(),
            convergence: Convergence::default(),
            noise: NoiseConfig::default(),
            initial_covariance: InitialCovariance::default(),
            foot_init: FootInit::default(),
            gravity: GRAVITY,
            legs: LegKinematics::default(),
        }
    }
}

impl TrialConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.n_trials == 0 {
            return Err(HarnessError::Config("n_trials must be at least 1".into()));
        }
        if !(self.initial_period >= 0.0) {
            return Err(HarnessError::Config("initial_period must be non-negative".into()));
        }
        if !(self.errors.velocity >= 0.0 && self.errors.rotation_deg >= 0.0) {
            return Err(HarnessError::Config("error ranges must be non-negative".into()));
        }
        if !(self.convergence.threshold > 0.0 && self.convergence.hold >= 0.0) {
            return Err(HarnessError::Config("convergence threshold must be positive".into()));
        }
        self.noise.validate().map_err(HarnessError::Config)?;
        self.legs.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn filter_config(&self) -> FilterConfig {
        FilterConfig {
            measurement: self.measurement,
            noise: self.noise,
            gravity: self.gravity,
            initial_covariance: self.initial_covariance,
            foot_init: self.foot_init,
            legs: self.legs.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(TrialConfig::from_toml("").unwrap(), TrialConfig::default());
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = TrialConfig {
            filter: FilterKind::Baseline,
            measurement: MeasurementKind::Vec3,
            n_trials: 7,
            foot_init: FootInit::Reset { variance: 1.0 },
            ..TrialConfig::default()
        };
        assert_eq!(TrialConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let cfg = TrialConfig::from_toml("n_trials = 3\n[noise]\nsd_accel = 0.3\n").unwrap();
        assert_eq!(cfg.n_trials, 3);
        assert_eq!(cfg.noise.sd_accel, 0.3);
        assert_eq!(cfg.noise.sd_gyro, NoiseConfig::default().sd_gyro);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(TrialConfig::from_toml("n_trails = 3").is_err());
        assert!(TrialConfig::from_toml("n_trials = 0").is_err());
        assert!(TrialConfig::from_toml("[noise]\nsd_gyro = -1.0").is_err());
        assert!(TrialConfig::from_toml("filter = \"kalman\"").is_err());
    }
}
