//! Data plumbing around the filters: CSV streams, trial configuration,
//! Monte Carlo batteries, metrics and timing.

mod battery;
mod bench;
mod config;
mod csv_io;
mod metrics;

#[cfg(feature = "parallel")]
pub use battery::run_trials_parallel;
pub use battery::{observability_windows, run_battery, run_trial, run_trials_sequential, table_csv, TableColumn};
pub use bench::{bench, LoopStats, TimingReport};
pub use config::{Convergence, FilterKind, TrialConfig};
pub use csv_io::{ingest_csv, read_csv, write_csv, write_csv_file, Dataset};
pub use metrics::{convergence_time, orientation_rmse_deg, velocity_rmse, EulerAxis, MetricsReport, TickError, TrialMetrics};

use crate::filter::FilterError;
use crate::observability::ObservabilityError;
use crate::sim::SimError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("line {line}, column `{column}`: {message}")]
    Schema { line: usize, column: String, message: String },
    #[error("line {line}: time {t} does not increase (previous {previous})")]
    NonMonotone { line: usize, t: f64, previous: f64 },
    #[error("stream has no samples")]
    Empty,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("metrics need ground-truth columns, none present")]
    MissingTruth,
    #[error("yaw is unobservable and cannot enter the orientation error")]
    YawInOrientation,
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Observability(#[from] ObservabilityError),
}
