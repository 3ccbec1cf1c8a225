//! Resolution-sampling schedule for progressive multi-resolution training.
//!
//! A schedule is a per-epoch categorical distribution over `R` resolution
//! levels (index 0 = coarsest, `R-1` = finest), built in three phases:
//!
//! 1. **Warm-up** — linear interpolation from the uniform distribution to the
//!    first pre-training distribution.
//! 2. **Pre-training** — a Gaussian over resolution indices is discretized
//!    into per-resolution bins via the standard normal CDF; its mean moves
//!    from `mu_start` toward `mu_end` while the standard deviation shrinks
//!    from `sigma_start` to `sigma_end`, both following `epoch_norm^gamma`.
//!    Raw bin masses are clipped at the probability floor `epsilon` and
//!    renormalized once. The final `interp_epochs` rows are overwritten by a
//!    linear blend toward the fine-tuning distribution.
//! 3. **Fine-tuning** — one-hot on the finest resolution.
//!
//! During warm-up and pre-training, batches drawn at any resolution below
//! the finest get their size multiplied by `batch_multiplier`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::normal_cdf;

/// Probability-vector sums are enforced to this tolerance.
pub const PROB_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("degenerate distribution: all raw probabilities are zero and the floor is zero")]
    DegenerateDistribution,
    #[error("probability vector contains a negative entry: {0}")]
    NegativeProbability(f64),
    #[error("probability vector sums to {0}, expected 1")]
    UnnormalizedProbabilities(f64),
    #[error("epoch {epoch} out of range for schedule of {len} epochs")]
    EpochOutOfRange { epoch: usize, len: usize },
    #[error("no epochs matched the phase filter")]
    EmptySelection,
    #[error("unknown schedule variant `{0}`")]
    UnknownVariant(String),
}

/// Training phase a schedule row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Warmup,
    Pretrain,
    Finetune,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Warmup => "warmup",
            Phase::Pretrain => "pretrain",
            Phase::Finetune => "finetune",
        }
    }
}

/// Hyperparameters of the schedule.
///
/// Defaults follow the reference configuration: `gamma = 0.45`,
/// `mu_start = -R/2`, `mu_end = R-1`, `sigma_start = R/2`,
/// `sigma_end = 0.5`, probability floor `0.1`, a five-epoch terminal
/// interpolation window, ten warm-up epochs, and a 4x batch multiplier for
/// the lower resolutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    /// Number of resolution levels (>= 2).
    pub resolutions: usize,
    /// Pre-training epoch count `E` (>= 2).
    pub pretrain_epochs: usize,
    #[serde(default = "default_warmup")]
    pub warmup_epochs: usize,
    #[serde(default)]
    pub finetune_epochs: usize,
    /// Length `T` of the terminal interpolation window inside pre-training.
    /// `0` disables the window; otherwise `2 <= T <= E`.
    #[serde(default = "default_interp")]
    pub interp_epochs: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Defaults to `-R/2` when absent.
    #[serde(default)]
    pub mu_start: Option<f64>,
    /// Defaults to `R-1` when absent.
    #[serde(default)]
    pub mu_end: Option<f64>,
    /// Defaults to `R/2` when absent.
    #[serde(default)]
    pub sigma_start: Option<f64>,
    #[serde(default = "default_sigma_end")]
    pub sigma_end: f64,
    /// Probability floor, in `[0, 1/R)`.
    #[serde(default = "default_floor")]
    pub epsilon: f64,
    /// Batch-size multiplier for resolutions below the finest during
    /// warm-up and pre-training.
    #[serde(default = "default_multiplier")]
    pub batch_multiplier: usize,
    #[serde(default = "default_base_batch")]
    pub base_batch: usize,
}

fn default_warmup() -> usize {
    10
}
fn default_interp() -> usize {
    5
}
fn default_gamma() -> f64 {
    0.45
}
fn default_sigma_end() -> f64 {
    0.5
}
fn default_floor() -> f64 {
    0.1
}
fn default_multiplier() -> usize {
    4
}
fn default_base_batch() -> usize {
    16
}

impl ScheduleConfig {
    /// Reference configuration for `resolutions` levels and
    /// `pretrain_epochs` pre-training epochs.
    pub fn new(resolutions: usize, pretrain_epochs: usize) -> Self {
        Self {
            resolutions,
            pretrain_epochs,
            warmup_epochs: default_warmup(),
            finetune_epochs: 0,
            interp_epochs: default_interp(),
            gamma: default_gamma(),
            mu_start: None,
            mu_end: None,
            sigma_start: None,
            sigma_end: default_sigma_end(),
            epsilon: default_floor(),
            batch_multiplier: default_multiplier(),
            base_batch: default_base_batch(),
        }
    }

    pub fn mu_start(&self) -> f64 {
        self.mu_start
            .unwrap_or(-(self.resolutions as f64) / 2.0)
    }

    pub fn mu_end(&self) -> f64 {
        self.mu_end.unwrap_or(self.resolutions as f64 - 1.0)
    }

    pub fn sigma_start(&self) -> f64 {
        self.sigma_start.unwrap_or(self.resolutions as f64 / 2.0)
    }

    /// Check every configuration invariant.
    pub fn validate(&self) -> Result<(), ScheduleError> {
        let err = |msg: String| Err(ScheduleError::InvalidConfig(msg));
        let r = self.resolutions;
        if r < 2 {
            return err(format!("resolutions must be >= 2, got {r}"));
        }
        if self.pretrain_epochs < 2 {
            return err(format!(
                "pretrain_epochs must be >= 2, got {}",
                self.pretrain_epochs
            ));
        }
        if self.interp_epochs == 1 {
            return err("interp_epochs must be 0 or >= 2 (interpolation denominator)".into());
        }
        if self.interp_epochs > self.pretrain_epochs {
            return err(format!(
                "interp_epochs ({}) must not exceed pretrain_epochs ({})",
                self.interp_epochs, self.pretrain_epochs
            ));
        }
        if !(self.sigma_start() > 0.0 && self.sigma_end > 0.0) {
            return err("sigma_start and sigma_end must be > 0".into());
        }
        if self.sigma_end > self.sigma_start() {
            return err("sigma_end must not exceed sigma_start".into());
        }
        if self.mu_start() > self.mu_end() {
            return err("mu_start must not exceed mu_end".into());
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return err(format!("gamma must be positive and finite, got {}", self.gamma));
        }
        if !(0.0..1.0 / r as f64).contains(&self.epsilon) {
            return err(format!(
                "epsilon must lie in [0, 1/R) = [0, {}), got {}",
                1.0 / r as f64,
                self.epsilon
            ));
        }
        if self.batch_multiplier < 1 {
            return err("batch_multiplier must be >= 1".into());
        }
        if self.base_batch < 1 {
            return err("base_batch must be >= 1".into());
        }
        Ok(())
    }
}

/// Gaussian parameters for one pre-training epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochGaussian {
    pub mu: f64,
    pub sigma: f64,
    /// Epoch index normalized to `[0, 1]`.
    pub epoch_norm: f64,
}

/// Gaussian mean/std for pre-training epoch `e`.
///
/// `epoch_norm = e / (E - 1)`; `mu` and `sigma` interpolate between their
/// start and end values along `epoch_norm^gamma`.
pub fn pretrain_gaussian(e: usize, cfg: &ScheduleConfig) -> Result<EpochGaussian, ScheduleError> {
    if cfg.pretrain_epochs < 2 {
        return Err(ScheduleError::InvalidConfig(format!(
            "pretrain_epochs must be >= 2 for epoch normalization, got {}",
            cfg.pretrain_epochs
        )));
    }
    if e >= cfg.pretrain_epochs {
        return Err(ScheduleError::EpochOutOfRange {
            epoch: e,
            len: cfg.pretrain_epochs,
        });
    }
    let epoch_norm = e as f64 / (cfg.pretrain_epochs - 1) as f64;
    let shaped = epoch_norm.powf(cfg.gamma);
    Ok(EpochGaussian {
        mu: cfg.mu_start() + (cfg.mu_end() - cfg.mu_start()) * shaped,
        sigma: cfg.sigma_start() - (cfg.sigma_start() - cfg.sigma_end) * shaped,
        epoch_norm,
    })
}

/// Discretize a Gaussian over resolution indices into raw bin masses.
///
/// Bin edges sit at `r + 1/2` with the lowest edge pinned to cumulative
/// mass zero, so bin 0 absorbs the lower tail while mass above the top edge
/// `R - 1/2` is dropped. The output is nonnegative and sums to at most 1.
pub fn raw_probabilities(g: &EpochGaussian, resolutions: usize) -> Result<Vec<f64>, ScheduleError> {
    if resolutions < 2 {
        return Err(ScheduleError::InvalidConfig(format!(
            "resolutions must be >= 2, got {resolutions}"
        )));
    }
    if g.sigma <= 0.0 {
        return Err(ScheduleError::InvalidConfig(format!(
            "sigma must be > 0, got {}",
            g.sigma
        )));
    }
    let mut out = Vec::with_capacity(resolutions);
    let mut prev = 0.0;
    for r in 0..resolutions {
        let edge = normal_cdf((r as f64 + 0.5 - g.mu) / g.sigma);
        // Phi is monotone, but guard against rounding at saturated edges.
        out.push((edge - prev).max(0.0));
        prev = edge;
    }
    Ok(out)
}

/// Clip raw masses at the floor `eps` and renormalize in a single pass.
///
/// A post-normalization entry may fall below `eps`; it is bounded below by
/// `eps / (1 + R * eps)` whenever the raw masses sum to at most 1.
pub fn floor_renormalize(raw: &[f64], eps: f64) -> Result<Vec<f64>, ScheduleError> {
    if let Some(&bad) = raw.iter().find(|v| **v < 0.0) {
        return Err(ScheduleError::NegativeProbability(bad));
    }
    let clipped: Vec<f64> = raw.iter().map(|&v| v.max(eps)).collect();
    let total: f64 = clipped.iter().sum();
    if total <= 0.0 {
        return Err(ScheduleError::DegenerateDistribution);
    }
    Ok(clipped.iter().map(|&v| v / total).collect())
}

/// One epoch of a materialized schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRow {
    pub phase: Phase,
    /// Global epoch index across all phases.
    pub epoch: usize,
    pub probs: Vec<f64>,
}

/// Ablation variants of the schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Probability floor removed (`epsilon = 0`).
    NoFloor,
    /// Warm-up phase removed.
    NoWarmup,
    /// Fine-tuning phase removed.
    NoFinetune,
    /// Pre-training replaced by consecutive one-hot blocks, coarsest to
    /// finest, with no mixing, no warm-up, and no terminal interpolation.
    HardSwitch,
    /// Every pre-training row is the uniform distribution.
    ConstantEqual,
}

impl std::str::FromStr for Variant {
    type Err = ScheduleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "no_floor" => Ok(Variant::NoFloor),
            "no_warmup" => Ok(Variant::NoWarmup),
            "no_finetune" => Ok(Variant::NoFinetune),
            "hard_switch" => Ok(Variant::HardSwitch),
            "constant_equal" => Ok(Variant::ConstantEqual),
            other => Err(ScheduleError::UnknownVariant(other.to_string())),
        }
    }
}

/// A fully materialized schedule: one probability vector per epoch.
///
/// Construction precomputes the whole table; sampling never recomputes
/// CDFs. Rows always sum to 1 within [`PROB_SUM_TOL`] and fine-tuning rows
/// are exactly one-hot on the finest resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub rows: Vec<ScheduleRow>,
    pub config: ScheduleConfig,
}

impl Schedule {
    /// Materialize the full three-phase schedule.
    pub fn build(cfg: &ScheduleConfig) -> Result<Self, ScheduleError> {
        cfg.validate()?;
        let r = cfg.resolutions;
        let e_total = cfg.pretrain_epochs;

        let mut pretrain: Vec<Vec<f64>> = (0..e_total)
            .map(|e| {
                let g = pretrain_gaussian(e, cfg)?;
                floor_renormalize(&raw_probabilities(&g, r)?, cfg.epsilon)
            })
            .collect::<Result<_, _>>()?;
        overwrite_interp_window(&mut pretrain, cfg.interp_epochs, r);

        Self::assemble(cfg, pretrain)
    }

    /// Materialize an ablation variant.
    pub fn build_variant(cfg: &ScheduleConfig, variant: Variant) -> Result<Self, ScheduleError> {
        match variant {
            Variant::NoFloor => {
                let mut cfg = cfg.clone();
                cfg.epsilon = 0.0;
                Self::build(&cfg)
            }
            Variant::NoWarmup => {
                let mut cfg = cfg.clone();
                cfg.warmup_epochs = 0;
                Self::build(&cfg)
            }
            Variant::NoFinetune => {
                let mut cfg = cfg.clone();
                cfg.finetune_epochs = 0;
                Self::build(&cfg)
            }
            Variant::HardSwitch => {
                cfg.validate()?;
                let mut cfg = cfg.clone();
                cfg.warmup_epochs = 0;
                let r = cfg.resolutions;
                let e_total = cfg.pretrain_epochs;
                // Balanced consecutive blocks: block b covers
                // [b*E/R, (b+1)*E/R).
                let pretrain = (0..e_total)
                    .map(|e| one_hot(r, (e * r / e_total).min(r - 1)))
                    .collect();
                Self::assemble(&cfg, pretrain)
            }
            Variant::ConstantEqual => {
                cfg.validate()?;
                let r = cfg.resolutions;
                let pretrain = vec![uniform(r); cfg.pretrain_epochs];
                Self::assemble(cfg, pretrain)
            }
        }
    }

    /// Single-resolution baseline: every epoch one-hot on `level`, with the
    /// same total epoch count the config would produce (warm-up +
    /// pre-training + fine-tuning). All rows carry the pre-training phase
    /// tag, so the lower-resolution batch multiplier applies below the top
    /// level.
    pub fn single_resolution(cfg: &ScheduleConfig, level: usize) -> Result<Self, ScheduleError> {
        cfg.validate()?;
        if level >= cfg.resolutions {
            return Err(ScheduleError::InvalidConfig(format!(
                "level {level} out of range for {} resolutions",
                cfg.resolutions
            )));
        }
        let total = cfg.warmup_epochs + cfg.pretrain_epochs + cfg.finetune_epochs;
        let rows = (0..total)
            .map(|epoch| ScheduleRow {
                phase: Phase::Pretrain,
                epoch,
                probs: one_hot(cfg.resolutions, level),
            })
            .collect();
        let schedule = Self {
            rows,
            config: cfg.clone(),
        };
        schedule.check_rows()?;
        Ok(schedule)
    }

    fn assemble(cfg: &ScheduleConfig, pretrain: Vec<Vec<f64>>) -> Result<Self, ScheduleError> {
        let r = cfg.resolutions;
        let mut rows = Vec::with_capacity(cfg.warmup_epochs + pretrain.len() + cfg.finetune_epochs);

        // Warm-up: uniform at the first row, the first pre-training
        // distribution at the last. A single warm-up epoch stays uniform.
        let start = uniform(r);
        let target = &pretrain[0];
        for w in 0..cfg.warmup_epochs {
            let s = if cfg.warmup_epochs > 1 {
                w as f64 / (cfg.warmup_epochs - 1) as f64
            } else {
                0.0
            };
            let probs = lerp(&start, target, s);
            rows.push(ScheduleRow {
                phase: Phase::Warmup,
                epoch: rows.len(),
                probs,
            });
        }
        for probs in pretrain {
            rows.push(ScheduleRow {
                phase: Phase::Pretrain,
                epoch: rows.len(),
                probs,
            });
        }
        for _ in 0..cfg.finetune_epochs {
            rows.push(ScheduleRow {
                phase: Phase::Finetune,
                epoch: rows.len(),
                probs: one_hot(r, r - 1),
            });
        }

        let schedule = Self {
            rows,
            config: cfg.clone(),
        };
        schedule.check_rows()?;
        Ok(schedule)
    }

    fn check_rows(&self) -> Result<(), ScheduleError> {
        for row in &self.rows {
            if let Some(&bad) = row.probs.iter().find(|v| **v < 0.0) {
                return Err(ScheduleError::NegativeProbability(bad));
            }
            let total: f64 = row.probs.iter().sum();
            if (total - 1.0).abs() > PROB_SUM_TOL {
                return Err(ScheduleError::UnnormalizedProbabilities(total));
            }
        }
        Ok(())
    }

    pub fn total_epochs(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, epoch: usize) -> Result<&ScheduleRow, ScheduleError> {
        self.rows.get(epoch).ok_or(ScheduleError::EpochOutOfRange {
            epoch,
            len: self.rows.len(),
        })
    }

    /// Per-batch (resolution, batch size) draws for one epoch.
    ///
    /// The batch multiplier applies to resolutions below the finest during
    /// warm-up and pre-training only. Consumes exactly one uniform variate
    /// per batch.
    pub fn batch_plan<R: Rng>(
        &self,
        epoch: usize,
        batches_per_epoch: usize,
        rng: &mut R,
    ) -> Result<Vec<(usize, usize)>, ScheduleError> {
        let row = self.row(epoch)?;
        let top = self.config.resolutions - 1;
        let mut plan = Vec::with_capacity(batches_per_epoch);
        for _ in 0..batches_per_epoch {
            let res = sample_resolution(&row.probs, rng)?;
            let size = if res < top && matches!(row.phase, Phase::Warmup | Phase::Pretrain) {
                self.config.base_batch * self.config.batch_multiplier
            } else {
                self.config.base_batch
            };
            plan.push((res, size));
        }
        Ok(plan)
    }

    /// Mean probability vector over the selected epochs: the expected
    /// fraction of batches per resolution, multiplier-agnostic.
    pub fn expected_ratios(&self, phase: Option<Phase>) -> Result<Vec<f64>, ScheduleError> {
        let selected: Vec<&ScheduleRow> = self
            .rows
            .iter()
            .filter(|row| phase.map_or(true, |p| row.phase == p))
            .collect();
        if selected.is_empty() {
            return Err(ScheduleError::EmptySelection);
        }
        let r = self.config.resolutions;
        let mut mean = vec![0.0; r];
        for row in &selected {
            for (m, p) in mean.iter_mut().zip(&row.probs) {
                *m += p;
            }
        }
        for m in &mut mean {
            *m /= selected.len() as f64;
        }
        Ok(mean)
    }

    /// CSV export: header then one row per epoch, probabilities printed
    /// with 9 decimal digits.
    pub fn to_csv(&self) -> String {
        let r = self.config.resolutions;
        let mut out = String::from("phase,epoch");
        for i in 0..r {
            out.push_str(&format!(",p_{i}"));
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(row.phase.as_str());
            out.push_str(&format!(",{}", row.epoch));
            for p in &row.probs {
                out.push_str(&format!(",{p:.9}"));
            }
            out.push('\n');
        }
        out
    }

    /// JSON export mirroring the CSV contents, probabilities rounded to 9
    /// decimal digits.
    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| {
                serde_json::json!({
                    "phase": row.phase.as_str(),
                    "epoch": row.epoch,
                    "probs": row.probs.iter().map(|p| round9(*p)).collect::<Vec<f64>>(),
                })
            })
            .collect();
        serde_json::json!({ "config": self.config, "rows": rows })
    }
}

fn round9(p: f64) -> f64 {
    (p * 1e9).round() / 1e9
}

fn uniform(r: usize) -> Vec<f64> {
    vec![1.0 / r as f64; r]
}

fn one_hot(r: usize, idx: usize) -> Vec<f64> {
    let mut v = vec![0.0; r];
    v[idx] = 1.0;
    v
}

fn lerp(a: &[f64], b: &[f64], s: f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(x, y)| (1.0 - s) * x + s * y)
        .collect()
}

/// Overwrite the last `t` pre-training rows with a linear blend from the
/// row at `E - t` toward the one-hot fine-tuning distribution.
fn overwrite_interp_window(pretrain: &mut [Vec<f64>], t: usize, r: usize) {
    if t < 2 {
        return;
    }
    let e_total = pretrain.len();
    let base = pretrain[e_total - t].clone();
    let fine = one_hot(r, r - 1);
    for (i, row) in pretrain[e_total - t..].iter_mut().enumerate() {
        let s = i as f64 / (t - 1) as f64;
        *row = lerp(&base, &fine, s);
    }
}

/// Draw a resolution index from a categorical distribution by inverse CDF.
///
/// Consumes exactly one uniform variate; identical seed and draw count give
/// identical sequences.
pub fn sample_resolution<R: Rng>(probs: &[f64], rng: &mut R) -> Result<usize, ScheduleError> {
    if let Some(&bad) = probs.iter().find(|v| **v < 0.0) {
        return Err(ScheduleError::NegativeProbability(bad));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(ScheduleError::UnnormalizedProbabilities(total));
    }
    let u: f64 = rng.gen();
    let mut cumulative = 0.0;
    let mut last_nonzero = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_nonzero = i;
        }
        cumulative += p;
        if u < cumulative {
            return Ok(i);
        }
    }
    // Rounding pushed the cumulative sum just below u.
    Ok(last_nonzero)
}
