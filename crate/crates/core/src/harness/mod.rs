//! Desk-scale training harness: a synthetic parametric shape dataset with
//! analytic drag targets and velocity fields, simulation-parameter
//! encoding, stratified splitting, a linear toy surrogate trained under any
//! resolution schedule, and a voxel-throughput cost model for comparing
//! schedules.

mod compare;
mod dataset;
mod encode;
mod shapes;
mod split;
mod train;

pub use compare::{compare_schedules, ComparisonReport, RunRow, ScheduleSummary};
pub use dataset::{generate_dataset, pooled_features, ToySample, FEATURE_DIM, POOL_LEVELS};
pub use encode::SimParamEncoder;
pub use shapes::{analytic_sdf, sample_grids, velocity_at, ShapeFamily, ShapeSpec};
pub use split::stratified_split;
pub use train::{
    cyclic_lr, smooth_l1, smooth_l1_derivative, train_toy, CostLog, CostRecord, ToyModel,
    TrainOptions, TrainResult, WeightMode,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("dataset must have at least {min} samples, got {got}")]
    DatasetTooSmall { min: usize, got: usize },
    #[error("empty {0} split")]
    EmptySplit(&'static str),
    #[error("split fractions must sum to 1, got {0}")]
    BadFractions(f64),
    #[error("quantile bins must be >= 1")]
    NoBins,
    #[error("need at least 2 vectors to fit the encoder, got {0}")]
    TooFewVectors(usize),
    #[error("inconsistent simulation-parameter dimension: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("requested {k} components but the effective rank is {rank}")]
    RankTooLow { k: usize, rank: usize },
    #[error("training diverged at epoch {epoch} (last good validation mse {last_val_mse})")]
    Diverged { epoch: usize, last_val_mse: f64 },
    #[error("feature dimension mismatch: model {model}, input {input}")]
    FeatureDim { model: usize, input: usize },
    #[error("need at least 2 schedules to compare, got {0}")]
    TooFewSchedules(usize),
    #[error(transparent)]
    Schedule(#[from] crate::schedule::ScheduleError),
    #[error(transparent)]
    Weights(#[from] crate::weights::WeightError),
}
