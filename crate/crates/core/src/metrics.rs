//! Evaluation metrics: drag-coefficient errors in drag counts, per-sample
//! relative L2 field error, and the group-balanced aggregation protocol
//! (datasets weigh equally within a group, groups weigh equally overall).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::VoxelGrid;
use crate::numeric::pairwise_sum;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no samples selected")]
    NoSamples,
    #[error("sample `{0}` has no {1} field")]
    MissingField(String, &'static str),
    #[error("sample `{0}`: field shapes do not match")]
    FieldShapeMismatch(String),
    #[error("sample `{0}`: true field has zero norm, relative error undefined")]
    ZeroNormField(String),
    #[error("R^2 needs at least 2 samples, got {0}")]
    TooFewForR2(usize),
    #[error("R^2 undefined: cd_true has zero variance")]
    ZeroVariance,
    #[error("non-finite drag coefficient on sample `{0}`")]
    NonFiniteCd(String),
    #[error("dataset `{0}` is not assigned to any group")]
    UnassignedDataset(String),
    #[error("group `{0}` has no datasets")]
    EmptyGroup(String),
}

/// One evaluated sample: true/predicted drag coefficient plus optional
/// true/predicted velocity fields.
#[derive(Debug, Clone)]
pub struct SampleRecord {
    pub dataset_id: String,
    pub sample_id: String,
    pub cd_true: f64,
    pub cd_pred: f64,
    pub field_true: Option<VoxelGrid>,
    pub field_pred: Option<VoxelGrid>,
}

impl SampleRecord {
    pub fn new(dataset_id: &str, sample_id: &str, cd_true: f64, cd_pred: f64) -> Self {
        Self {
            dataset_id: dataset_id.to_string(),
            sample_id: sample_id.to_string(),
            cd_true,
            cd_pred,
            field_true: None,
            field_pred: None,
        }
    }
}

/// Mean relative L2 error over samples, in percent: for each sample
/// `||u - u_hat||_2 / ||u||_2` with all cells and channels flattened, then
/// the arithmetic mean across samples, times 100.
pub fn relative_l2(samples: &[&SampleRecord]) -> Result<f64, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::NoSamples);
    }
    let mut ratios = Vec::with_capacity(samples.len());
    for s in samples {
        let truth = s
            .field_true
            .as_ref()
            .ok_or_else(|| MetricsError::MissingField(s.sample_id.clone(), "true"))?;
        let pred = s
            .field_pred
            .as_ref()
            .ok_or_else(|| MetricsError::MissingField(s.sample_id.clone(), "predicted"))?;
        if truth.shape() != pred.shape() || truth.channels() != pred.channels() {
            return Err(MetricsError::FieldShapeMismatch(s.sample_id.clone()));
        }
        let diff2: Vec<f64> = truth
            .data()
            .iter()
            .zip(pred.data())
            .map(|(a, b)| (a - b) * (a - b))
            .collect();
        let true2: Vec<f64> = truth.data().iter().map(|a| a * a).collect();
        let denom = pairwise_sum(&true2).sqrt();
        if denom == 0.0 {
            return Err(MetricsError::ZeroNormField(s.sample_id.clone()));
        }
        ratios.push(pairwise_sum(&diff2).sqrt() / denom);
    }
    Ok(crate::numeric::pairwise_mean(&ratios) * 100.0)
}

/// Drag-coefficient metrics. One drag count = 0.001 of `c_d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DragMetrics {
    pub mae_counts: f64,
    pub maxae_counts: f64,
    pub r2: f64,
}

/// MAE and MaxAE in drag counts and the coefficient of determination.
pub fn drag_metrics(samples: &[&SampleRecord]) -> Result<DragMetrics, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::NoSamples);
    }
    if samples.len() < 2 {
        return Err(MetricsError::TooFewForR2(samples.len()));
    }
    for s in samples {
        if !s.cd_true.is_finite() || !s.cd_pred.is_finite() {
            return Err(MetricsError::NonFiniteCd(s.sample_id.clone()));
        }
    }
    let abs_err: Vec<f64> = samples
        .iter()
        .map(|s| (s.cd_pred - s.cd_true).abs())
        .collect();
    let mae = crate::numeric::pairwise_mean(&abs_err) * 1000.0;
    let maxae = abs_err.iter().fold(0.0f64, |m, &e| m.max(e)) * 1000.0;

    let cd_true: Vec<f64> = samples.iter().map(|s| s.cd_true).collect();
    let mean_true = crate::numeric::pairwise_mean(&cd_true);
    let ss_res: Vec<f64> = samples
        .iter()
        .map(|s| (s.cd_pred - s.cd_true) * (s.cd_pred - s.cd_true))
        .collect();
    let ss_tot: Vec<f64> = cd_true
        .iter()
        .map(|c| (c - mean_true) * (c - mean_true))
        .collect();
    let ss_tot_sum = pairwise_sum(&ss_tot);
    if ss_tot_sum == 0.0 {
        return Err(MetricsError::ZeroVariance);
    }
    Ok(DragMetrics {
        mae_counts: mae,
        maxae_counts: maxae,
        r2: 1.0 - pairwise_sum(&ss_res) / ss_tot_sum,
    })
}

/// Metrics for one dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetrics {
    pub mae_counts: f64,
    pub maxae_counts: f64,
    pub r2: f64,
    /// Present when every sample in the dataset carries both fields.
    pub rel_l2_percent: Option<f64>,
    pub n_samples: usize,
}

/// Aggregates for one group or the overall row. Within a group, MAE, R^2,
/// and relative L2 average unweighted over datasets while MaxAE takes the
/// max; across groups every value averages unweighted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub mae_counts: f64,
    pub maxae_counts: f64,
    pub r2: f64,
    pub rel_l2_percent: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub per_dataset: BTreeMap<String, DatasetMetrics>,
    pub per_group: BTreeMap<String, AggregateMetrics>,
    pub overall: AggregateMetrics,
}

fn mean(values: &[f64]) -> f64 {
    crate::numeric::pairwise_mean(values)
}

/// Metrics for one dataset's samples; relative L2 is included when every
/// sample has both fields.
pub fn dataset_metrics(samples: &[&SampleRecord]) -> Result<DatasetMetrics, MetricsError> {
    let drag = drag_metrics(samples)?;
    let all_fields = samples
        .iter()
        .all(|s| s.field_true.is_some() && s.field_pred.is_some());
    let rel = if all_fields {
        Some(relative_l2(samples)?)
    } else {
        None
    };
    Ok(DatasetMetrics {
        mae_counts: drag.mae_counts,
        maxae_counts: drag.maxae_counts,
        r2: drag.r2,
        rel_l2_percent: rel,
        n_samples: samples.len(),
    })
}

/// Aggregate per-dataset metrics into per-group and overall rows.
///
/// `grouping` maps dataset id to group id; every dataset must be assigned
/// and every named group must end up non-empty.
pub fn group_aggregate(
    per_dataset: &BTreeMap<String, DatasetMetrics>,
    grouping: &BTreeMap<String, String>,
) -> Result<MetricReport, MetricsError> {
    if per_dataset.is_empty() {
        return Err(MetricsError::NoSamples);
    }
    let mut groups: BTreeMap<String, Vec<&DatasetMetrics>> = BTreeMap::new();
    for (dataset, metrics) in per_dataset {
        let group = grouping
            .get(dataset)
            .ok_or_else(|| MetricsError::UnassignedDataset(dataset.clone()))?;
        groups.entry(group.clone()).or_default().push(metrics);
    }
    for group in grouping.values() {
        if !groups.contains_key(group) {
            return Err(MetricsError::EmptyGroup(group.clone()));
        }
    }

    let mut per_group = BTreeMap::new();
    for (group, members) in &groups {
        let maes: Vec<f64> = members.iter().map(|m| m.mae_counts).collect();
        let r2s: Vec<f64> = members.iter().map(|m| m.r2).collect();
        let rels: Vec<f64> = members.iter().filter_map(|m| m.rel_l2_percent).collect();
        per_group.insert(
            group.clone(),
            AggregateMetrics {
                mae_counts: mean(&maes),
                maxae_counts: members
                    .iter()
                    .map(|m| m.maxae_counts)
                    .fold(0.0f64, f64::max),
                r2: mean(&r2s),
                rel_l2_percent: if rels.len() == members.len() {
                    Some(mean(&rels))
                } else {
                    None
                },
            },
        );
    }

    let g: Vec<&AggregateMetrics> = per_group.values().collect();
    let rels: Vec<f64> = g.iter().filter_map(|m| m.rel_l2_percent).collect();
    let overall = AggregateMetrics {
        mae_counts: mean(&g.iter().map(|m| m.mae_counts).collect::<Vec<_>>()),
        maxae_counts: mean(&g.iter().map(|m| m.maxae_counts).collect::<Vec<_>>()),
        r2: mean(&g.iter().map(|m| m.r2).collect::<Vec<_>>()),
        rel_l2_percent: if rels.len() == g.len() && !rels.is_empty() {
            Some(mean(&rels))
        } else {
            None
        },
    };
    Ok(MetricReport {
        per_dataset: per_dataset.clone(),
        per_group,
        overall,
    })
}

/// Full pipeline: split samples by dataset, compute per-dataset metrics,
/// aggregate by group.
pub fn compute_report(
    samples: &[SampleRecord],
    grouping: &BTreeMap<String, String>,
) -> Result<MetricReport, MetricsError> {
    let mut by_dataset: BTreeMap<String, Vec<&SampleRecord>> = BTreeMap::new();
    for s in samples {
        by_dataset.entry(s.dataset_id.clone()).or_default().push(s);
    }
    let mut per_dataset = BTreeMap::new();
    for (dataset, members) in &by_dataset {
        per_dataset.insert(dataset.clone(), dataset_metrics(members)?);
    }
    group_aggregate(&per_dataset, grouping)
}
