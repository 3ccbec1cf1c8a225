//! Toy surrogate training under a resolution schedule.
//!
//! The model is linear in the pooled SDF features (optionally plus encoded
//! simulation parameters), so gradients are exact and schedule effects are
//! measurable without optimization luck. Every batch's simulated compute
//! cost is `batch_size * voxel_count(resolution)`, logged in integer voxel
//! units and normalized so one R512 sample costs 1.0.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::ToySample;
use super::HarnessError;
use crate::grid::{Resolution, Roi};
use crate::schedule::Schedule;
use crate::sdf::mask_usdf;
use crate::weights::{combined_weight, WeightConfig};

/// Triangular cyclic learning rate: base at step 0, max at `half_cycle`,
/// back to base at `2 * half_cycle`, period `2 * half_cycle`.
pub fn cyclic_lr(step: usize, base_lr: f64, max_lr: f64, half_cycle: usize) -> f64 {
    let half = half_cycle.max(1);
    let s = step % (2 * half);
    let tri = if s <= half {
        s as f64 / half as f64
    } else {
        2.0 - s as f64 / half as f64
    };
    base_lr + (max_lr - base_lr) * tri
}

/// Smooth L1 (Huber-style) loss of a residual.
pub fn smooth_l1(residual: f64, beta: f64) -> f64 {
    let r = residual.abs();
    if r < beta {
        0.5 * residual * residual / beta
    } else {
        r - 0.5 * beta
    }
}

/// Derivative of [`smooth_l1`] with respect to the residual; continuous at
/// the knee.
pub fn smooth_l1_derivative(residual: f64, beta: f64) -> f64 {
    if residual.abs() < beta {
        residual / beta
    } else {
        residual.signum()
    }
}

/// Field-loss weighting for [`train_toy`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// Drag-coefficient loss only.
    Uniform,
    /// Adds a weighted Smooth-L1 field loss through a linear per-cell
    /// readout, weighted by the combined distance/gradient field. Grids
    /// are materialized per batch, so keep this to demo scales.
    Eq1,
}

/// Per-dimension feature standardization fitted on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureNorm {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureNorm {
    /// Identity normalization.
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Fit over an iterator of feature vectors.
    pub fn fit<'a, I: Iterator<Item = &'a [f64]> + Clone>(vectors: I, dim: usize) -> Self {
        let mut mean = vec![0.0; dim];
        let mut count = 0usize;
        for v in vectors.clone() {
            for (m, f) in mean.iter_mut().zip(v) {
                *m += f;
            }
            count += 1;
        }
        for m in &mut mean {
            *m /= count.max(1) as f64;
        }
        let mut var = vec![0.0; dim];
        for v in vectors {
            for ((s, f), m) in var.iter_mut().zip(v).zip(&mean) {
                *s += (f - m) * (f - m);
            }
        }
        let std = var
            .iter()
            .map(|s| (s / count.max(1) as f64).sqrt().max(1e-12))
            .collect();
        Self { mean, std }
    }

    pub fn apply(&self, features: &[f64]) -> Vec<f64> {
        features
            .iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((f, m), s)| (f - m) / s)
            .collect()
    }
}

/// Linear readout on standardized pooled features, plus an optional
/// per-cell field head `u_ch = theta[ch][0] + theta[ch][1]*sdf +
/// theta[ch][2]*mask`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub norm: FeatureNorm,
    pub field_readout: Option<[[f64; 3]; 3]>,
}

impl ToyModel {
    pub fn new(feature_dim: usize, with_field_head: bool) -> Self {
        Self {
            weights: vec![0.0; feature_dim],
            bias: 0.0,
            norm: FeatureNorm::identity(feature_dim),
            field_readout: with_field_head.then_some([[0.0; 3]; 3]),
        }
    }

    /// Prediction from raw (unstandardized) features.
    pub fn predict(&self, features: &[f64]) -> Result<f64, HarnessError> {
        if features.len() != self.weights.len() {
            return Err(HarnessError::FeatureDim {
                model: self.weights.len(),
                input: features.len(),
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(&self.norm.apply(features))
            .map(|(w, f)| w * f)
            .sum::<f64>()
            + self.bias)
    }

    /// Mean Smooth-L1 loss and its gradient over a batch of raw (features,
    /// target) pairs.
    pub fn cd_loss_and_gradient(
        &self,
        batch: &[(&[f64], f64)],
        beta: f64,
    ) -> Result<(f64, Vec<f64>, f64), HarnessError> {
        let mut loss = 0.0;
        let mut grad_w = vec![0.0; self.weights.len()];
        let mut grad_b = 0.0;
        let n = batch.len() as f64;
        for (features, target) in batch {
            let residual = self.predict(features)? - target;
            loss += smooth_l1(residual, beta);
            let d = smooth_l1_derivative(residual, beta);
            for (g, f) in grad_w.iter_mut().zip(self.norm.apply(features)) {
                *g += d * f / n;
            }
            grad_b += d / n;
        }
        Ok((loss / n, grad_w, grad_b))
    }
}

/// One logged batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostRecord {
    pub epoch: usize,
    /// Resolution level index (0 = R128, 2 = R512).
    pub level: usize,
    pub batch_size: usize,
    /// `batch_size * voxel_count(level)`.
    pub voxel_units: u64,
}

/// Per-batch compute cost in integer voxel units.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CostLog {
    pub records: Vec<CostRecord>,
    pub cumulative_units: u64,
}

impl CostLog {
    pub fn push(&mut self, record: CostRecord) {
        self.cumulative_units += record.voxel_units;
        self.records.push(record);
    }

    /// Cumulative cost normalized so one R512 sample is 1.0.
    pub fn normalized(&self) -> f64 {
        self.cumulative_units as f64 / Resolution::R512.cell_count() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,level,resolution,batch_size,voxel_units\n");
        for r in &self.records {
            let res = Resolution::from_level(r.level).map_or("?", |x| x.as_str());
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.epoch, r.level, res, r.batch_size, r.voxel_units
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainOptions {
    pub train_idx: Vec<usize>,
    pub val_idx: Vec<usize>,
    pub batches_per_epoch: usize,
    pub base_lr: f64,
    pub max_lr: f64,
    /// Half period of the cyclic learning rate, in steps (batches).
    pub half_cycle: usize,
    pub smooth_l1_beta: f64,
    pub seed: u64,
    /// Resolution level used for validation features.
    pub val_level: usize,
    /// Scale of the field loss relative to the cd loss in Eq1 mode.
    pub field_loss_scale: f64,
}

impl TrainOptions {
    pub fn new(train_idx: Vec<usize>, val_idx: Vec<usize>, seed: u64) -> Self {
        Self {
            train_idx,
            val_idx,
            batches_per_epoch: 8,
            base_lr: 0.01,
            max_lr: 0.08,
            half_cycle: 200,
            smooth_l1_beta: 1.0,
            seed,
            val_level: 2,
            field_loss_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub model: ToyModel,
    pub cost_log: CostLog,
    /// Mean squared error of cd on the validation split, one entry per
    /// epoch, computed at `val_level` features.
    pub val_mse: Vec<f64>,
    pub final_val_mse: f64,
    pub train_loss: Vec<f64>,
}

fn validation_mse(
    model: &ToyModel,
    dataset: &[ToySample],
    idx: &[usize],
    level: usize,
) -> Result<f64, HarnessError> {
    let mut acc = 0.0;
    for &i in idx {
        let err = model.predict(&dataset[i].features[level])? - dataset[i].target_cd;
        acc += err * err;
    }
    Ok(acc / idx.len() as f64)
}

/// Train the toy model under a schedule.
///
/// Per epoch the schedule's batch plan draws (resolution, batch size)
/// pairs; each batch samples train indices with replacement, computes the
/// exact gradient of the Smooth-L1 cd loss (plus the weighted field loss in
/// [`WeightMode::Eq1`]), and applies plain SGD with the cyclic learning
/// rate. Everything is driven by one seeded generator, so identical inputs
/// give bit-identical cost logs and weights.
pub fn train_toy(
    dataset: &[ToySample],
    sched: &Schedule,
    weight_mode: WeightMode,
    opts: &TrainOptions,
) -> Result<TrainResult, HarnessError> {
    if opts.train_idx.is_empty() {
        return Err(HarnessError::EmptySplit("train"));
    }
    if opts.val_idx.is_empty() {
        return Err(HarnessError::EmptySplit("validation"));
    }
    let feature_dim = dataset[opts.train_idx[0]].features[0].len();
    let mut model = ToyModel::new(feature_dim, weight_mode == WeightMode::Eq1);
    // Standardize features with training-split statistics (all levels
    // pooled, so the model stays resolution-agnostic).
    model.norm = FeatureNorm::fit(
        opts.train_idx
            .iter()
            .flat_map(|&i| dataset[i].features.iter().map(|f| f.as_slice())),
        feature_dim,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut cost_log = CostLog::default();
    let mut val_mse = Vec::with_capacity(sched.total_epochs());
    let mut train_loss = Vec::with_capacity(sched.total_epochs());
    let mut step = 0usize;
    let mut last_val = f64::NAN;
    let roi = Roi::vehicle_default();
    let weight_cfg = WeightConfig::default();

    for epoch in 0..sched.total_epochs() {
        let plan = sched.batch_plan(epoch, opts.batches_per_epoch, &mut rng)?;
        let mut epoch_loss = 0.0;
        for (level, batch_size) in plan {
            let resolution = Resolution::from_level(level).expect("resolution level");
            cost_log.push(CostRecord {
                epoch,
                level,
                batch_size,
                voxel_units: (batch_size * resolution.cell_count()) as u64,
            });
            let indices: Vec<usize> = (0..batch_size)
                .map(|_| opts.train_idx[rng.gen_range(0..opts.train_idx.len())])
                .collect();
            let batch: Vec<(&[f64], f64)> = indices
                .iter()
                .map(|&i| (dataset[i].features[level].as_slice(), dataset[i].target_cd))
                .collect();
            let (mut loss, grad_w, grad_b) =
                model.cd_loss_and_gradient(&batch, opts.smooth_l1_beta)?;
            let lr = cyclic_lr(step, opts.base_lr, opts.max_lr, opts.half_cycle);
            for (w, g) in model.weights.iter_mut().zip(&grad_w) {
                *w -= lr * g;
            }
            model.bias -= lr * grad_b;

            if weight_mode == WeightMode::Eq1 {
                loss += field_loss_step(&mut model, dataset, &indices, resolution, &roi, &weight_cfg, opts, lr)?;
            }

            if !loss.is_finite() {
                return Err(HarnessError::Diverged {
                    epoch,
                    last_val_mse: last_val,
                });
            }
            epoch_loss += loss;
            step += 1;
        }
        train_loss.push(epoch_loss / opts.batches_per_epoch as f64);
        last_val = validation_mse(&model, dataset, &opts.val_idx, opts.val_level)?;
        if !last_val.is_finite() {
            return Err(HarnessError::Diverged {
                epoch,
                last_val_mse: *val_mse.last().unwrap_or(&f64::NAN),
            });
        }
        val_mse.push(last_val);
    }
    Ok(TrainResult {
        model,
        cost_log,
        final_val_mse: last_val,
        val_mse,
        train_loss,
    })
}

/// One SGD step on the weighted per-cell field loss; returns the loss.
#[allow(clippy::too_many_arguments)]
fn field_loss_step(
    model: &mut ToyModel,
    dataset: &[ToySample],
    indices: &[usize],
    resolution: Resolution,
    roi: &Roi,
    weight_cfg: &WeightConfig,
    opts: &TrainOptions,
    lr: f64,
) -> Result<f64, HarnessError> {
    let theta = model.field_readout.as_mut().expect("field head");
    let mut loss = 0.0;
    let mut grad = [[0.0f64; 3]; 3];
    let shape = resolution.shape();
    for &i in indices {
        let (sdf, velocity) = super::shapes::sample_grids(&dataset[i].spec, roi, shape);
        let (mask, usdf) = mask_usdf(&sdf).expect("sdf grid");
        let w = combined_weight(&usdf, &mask, &velocity, weight_cfg)?;
        let n = sdf.cell_count();
        let scale = opts.field_loss_scale / (indices.len() * n * 3) as f64;
        for cell in 0..n {
            let basis = [1.0, sdf.data()[cell], mask.data()[cell]];
            let wc = w.grid.data()[cell];
            for ch in 0..3 {
                let pred: f64 = (0..3).map(|j| theta[ch][j] * basis[j]).sum();
                let residual = pred - velocity.data()[ch * n + cell];
                loss += wc * smooth_l1(residual, opts.smooth_l1_beta) * scale;
                let d = wc * smooth_l1_derivative(residual, opts.smooth_l1_beta) * scale;
                for j in 0..3 {
                    grad[ch][j] += d * basis[j];
                }
            }
        }
    }
    for ch in 0..3 {
        for j in 0..3 {
            theta[ch][j] -= lr * grad[ch][j];
        }
    }
    Ok(loss)
}
