//! Linearized observability of the offset-aware filter over a window of
//! estimates. `O` stacks `H_k`, `H_{k+1} Phi_k`, `H_{k+2} Phi_{k+1} Phi_k`, ...
//! and each state block is diagnosed by projecting the numerical null space
//! of `O` onto the block's coordinates: a block direction is observable when
//! it lies in the row space of `O`.

use crate::lie::{Matrix15, StateElement};
use crate::models::{measurement_jacobian, transition_matrix, MeasurementJacobian};
use nalgebra::{DMatrix, Vector3};
use std::fmt;
use thiserror::Error;

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOLERANCE: f64 = 1e-8;
/// Projections of the null space onto a block larger than this count as
/// unobservable directions.
pub const NULL_PROJECTION: f64 = 1e-6;
/// Speeds and rates below this are treated as zero when labelling regimes.
const REGIME_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObservabilityError {
    #[error("observability window needs at least 2 samples, got {0}")]
    WindowTooShort(usize),
    #[error("non-finite entry in observability matrix")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Stationary,
    ConstantOmega,
    General,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Stationary => "stationary",
            Regime::ConstantOmega => "constant-omega",
            Regime::General => "general",
        })
    }
}

/// Column groups reported separately. Roll/pitch and yaw split the
/// rotation block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateBlock {
    RollPitch,
    Yaw,
    Velocity,
    Position,
    OffsetRotation,
    OffsetPosition,
}

impl StateBlock {
    pub const ALL: [StateBlock; 6] =
        [StateBlock::RollPitch, StateBlock::Yaw, StateBlock::Velocity, StateBlock::Position, StateBlock::OffsetRotation, StateBlock::OffsetPosition];

    pub fn columns(self) -> std::ops::Range<usize> {
        match self {
            StateBlock::RollPitch => 0..2,
            StateBlock::Yaw => 2..3,
            StateBlock::Velocity => 3..6,
            StateBlock::Position => 6..9,
            StateBlock::OffsetRotation => 9..12,
            StateBlock::OffsetPosition => 12..15,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StateBlock::RollPitch => "roll_pitch",
            StateBlock::Yaw => "yaw",
            StateBlock::Velocity => "velocity",
            StateBlock::Position => "position",
            StateBlock::OffsetRotation => "offset_rotation",
            StateBlock::OffsetPosition => "offset_position",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiagnosis {
    pub block: StateBlock,
    /// Singular values of the null space projected onto the block,
    /// descending. These are the cosines of the principal angles between
    /// the block's coordinate axes and the null space.
    pub cosines: Vec<f64>,
    pub unobservable_dims: usize,
}

impl BlockDiagnosis {
    pub fn dims(&self) -> usize {
        self.block.columns().len()
    }

    pub fn fully_observable(&self) -> bool {
        self.unobservable_dims == 0
    }

    pub fn fully_unobservable(&self) -> bool {
        self.unobservable_dims == self.dims()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservabilityReport {
    pub o: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub blocks: Vec<BlockDiagnosis>,
    pub regime: Option<Regime>,
}

impl ObservabilityReport {
    pub fn block(&self, block: StateBlock) -> &BlockDiagnosis {
        self.blocks.iter().find(|b| b.block == block).expect("every block is diagnosed")
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "rank,{}\nregime,{}\nblock,dims,unobservable_dims,min_cosine,max_cosine\n",
            self.rank,
            self.regime.map_or("unknown".to_string(), |r| r.to_string())
        );
        for b in &self.blocks {
            let min = b.cosines.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = b.cosines.iter().cloned().fold(0.0, f64::max);
            out.push_str(&format!("{},{},{},{:.6e},{:.6e}\n", b.block.name(), b.dims(), b.unobservable_dims, min, max));
        }
        out
    }
}

/// One linearization point: the estimate, the gyro reading, the sole point
/// used in `H`, and the step to the next sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSample {
    pub state: StateElement,
    pub gyro: Vector3<f64>,
    pub foot: Vector3<f64>,
    pub dt: f64,
}

/// Stacks `H_i Phi_{i-1} ... Phi_0`. `steps[i].1` is the transition from
/// sample `i` to `i + 1`; the last one is unused.
pub fn observability_matrix(steps: &[(MeasurementJacobian, Matrix15)]) -> Result<DMatrix<f64>, ObservabilityError> {
    if steps.len() < 2 {
        return Err(ObservabilityError::WindowTooShort(steps.len()));
    }
    let mut o = DMatrix::zeros(3 * steps.len(), 15);
    let mut chain = Matrix15::identity();
    for (i, (h, phi)) in steps.iter().enumerate() {
        o.view_mut((3 * i, 0), (3, 15)).copy_from(&(h * chain));
        chain = phi * chain;
    }
    if o.iter().all(|x| x.is_finite()) {
        Ok(o)
    } else {
        Err(ObservabilityError::NonFinite)
    }
}

pub fn build_observability(steps: &[(MeasurementJacobian, Matrix15)]) -> Result<ObservabilityReport, ObservabilityError> {
    analyze(observability_matrix(steps)?, None)
}

/// Linearizes at each sample and labels the motion regime from the
/// window's angular rates and velocities.
pub fn build_observability_from_states(window: &[WindowSample], gravity: &Vector3<f64>) -> Result<ObservabilityReport, ObservabilityError> {
    let steps: Vec<_> = window.iter().map(|s| (measurement_jacobian(&s.state, &s.gyro, &s.foot), transition_matrix(s.dt, gravity))).collect();
    analyze(observability_matrix(&steps)?, Some(classify(window)))
}

pub fn classify(window: &[WindowSample]) -> Regime {
    let still = window.iter().all(|s| s.gyro.norm() < REGIME_EPS && s.state.v.norm() < REGIME_EPS);
    if still {
        return Regime::Stationary;
    }
    let spinning: Vec<_> = window.iter().map(|s| s.gyro).filter(|w| w.norm() >= REGIME_EPS).collect();
    let fixed_axis = spinning.windows(2).all(|w| w[0].normalize().cross(&w[1].normalize()).norm() < 1e-9);
    if fixed_axis {
        Regime::ConstantOmega
    } else {
        Regime::General
    }
}

fn analyze(o: DMatrix<f64>, regime: Option<Regime>) -> Result<ObservabilityReport, ObservabilityError> {
    // Thin SVD would drop null directions when O has fewer rows than columns.
    let square = if o.nrows() < 15 { o.clone().resize_vertically(15, 0.0) } else { o.clone() };
    let svd = square.svd(false, true);
    let v_t = svd.v_t.ok_or(ObservabilityError::NonFinite)?;
    let sigma_max = svd.singular_values.max();
    let tol = RANK_TOLERANCE * sigma_max;
    let null_rows: Vec<usize> = (0..15).filter(|&i| !(svd.singular_values[i] > tol)).collect();
    let rank = 15 - null_rows.len();
    let null_basis = DMatrix::from_fn(15, null_rows.len(), |r, c| v_t[(null_rows[c], r)]);

    let blocks = StateBlock::ALL
        .iter()
        .map(|&block| {
            let cols = block.columns();
            let selector = DMatrix::from_fn(15, cols.len(), |r, c| if r == cols.start + c { 1.0 } else { 0.0 });
            let mut cosines: Vec<f64> = if null_basis.ncols() == 0 {
                vec![0.0; cols.len()]
            } else {
                let sv = (selector.transpose() * &null_basis).singular_values();
                let mut v: Vec<f64> = sv.iter().map(|c| c.min(1.0)).collect();
                v.resize(cols.len(), 0.0);
                v
            };
            cosines.sort_by(|a, b| b.total_cmp(a));
            let unobservable_dims = cosines.iter().filter(|&&c| c > NULL_PROJECTION).count();
            BlockDiagnosis { block, cosines, unobservable_dims }
        })
        .collect();

    let mut singular_values: Vec<f64> = svd.singular_values.iter().cloned().collect();
    singular_values.sort_by(|a, b| b.total_cmp(a));
    Ok(ObservabilityReport { o, singular_values, rank, blocks, regime })
}
