//! Schedule comparison experiments: train the toy model under each
//! schedule for each seed, collect final validation error and cumulative
//! cost, and summarize per schedule.

use serde::{Deserialize, Serialize};

use super::dataset::ToySample;
use super::train::{train_toy, TrainOptions, WeightMode};
use super::HarnessError;
use crate::schedule::Schedule;

/// One (schedule, seed) run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRow {
    pub schedule: String,
    pub seed: u64,
    pub final_val_mse: f64,
    pub cumulative_voxel_units: u64,
    /// Cumulative cost normalized so one R512 sample costs 1.0.
    pub normalized_cost: f64,
    pub total_batches: usize,
    pub epochs: usize,
}

/// Mean and standard deviation over seeds for one schedule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleSummary {
    pub schedule: String,
    pub mean_val_mse: f64,
    pub std_val_mse: f64,
    pub mean_normalized_cost: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<RunRow>,
    pub summaries: Vec<ScheduleSummary>,
}

impl ComparisonReport {
    pub fn summary(&self, schedule: &str) -> Option<&ScheduleSummary> {
        self.summaries.iter().find(|s| s.schedule == schedule)
    }

    /// One row per (schedule, seed), then the per-schedule summary block.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "schedule,seed,final_val_mse,cumulative_voxel_units,normalized_cost,total_batches,epochs\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{:.12e},{},{:.6},{},{}\n",
                r.schedule,
                r.seed,
                r.final_val_mse,
                r.cumulative_voxel_units,
                r.normalized_cost,
                r.total_batches,
                r.epochs
            ));
        }
        out.push_str("\nschedule,mean_val_mse,std_val_mse,mean_normalized_cost\n");
        for s in &self.summaries {
            out.push_str(&format!(
                "{},{:.12e},{:.12e},{:.6}\n",
                s.schedule, s.mean_val_mse, s.std_val_mse, s.mean_normalized_cost
            ));
        }
        out
    }
}

/// Run every schedule for every seed and summarize.
///
/// The training options are shared; each run replaces the seed. Schedules
/// are compared on the same dataset and the same train/validation split.
pub fn compare_schedules(
    dataset: &[ToySample],
    schedules: &[(String, Schedule)],
    seeds: &[u64],
    base_opts: &TrainOptions,
) -> Result<ComparisonReport, HarnessError> {
    if schedules.len() < 2 {
        return Err(HarnessError::TooFewSchedules(schedules.len()));
    }
    let mut rows = Vec::with_capacity(schedules.len() * seeds.len());
    for (name, sched) in schedules {
        for &seed in seeds {
            let mut opts = base_opts.clone();
            opts.seed = seed;
            let result = train_toy(dataset, sched, WeightMode::Uniform, &opts)?;
            rows.push(RunRow {
                schedule: name.clone(),
                seed,
                final_val_mse: result.final_val_mse,
                cumulative_voxel_units: result.cost_log.cumulative_units,
                normalized_cost: result.cost_log.normalized(),
                total_batches: result.cost_log.records.len(),
                epochs: sched.total_epochs(),
            });
        }
    }
    let mut summaries = Vec::with_capacity(schedules.len());
    for (name, _) in schedules {
        let vals: Vec<f64> = rows
            .iter()
            .filter(|r| &r.schedule == name)
            .map(|r| r.final_val_mse)
            .collect();
        let costs: Vec<f64> = rows
            .iter()
            .filter(|r| &r.schedule == name)
            .map(|r| r.normalized_cost)
            .collect();
        let mean = crate::numeric::pairwise_mean(&vals);
        let var = if vals.len() > 1 {
            vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (vals.len() - 1) as f64
        } else {
            0.0
        };
        summaries.push(ScheduleSummary {
            schedule: name.clone(),
            mean_val_mse: mean,
            std_val_mse: var.sqrt(),
            mean_normalized_cost: crate::numeric::pairwise_mean(&costs),
        });
    }
    Ok(ComparisonReport { rows, summaries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::generate_dataset;
    use crate::schedule::{Schedule, ScheduleConfig, Variant};

    fn small_cfg() -> ScheduleConfig {
        let mut cfg = ScheduleConfig::new(3, 8);
        cfg.warmup_epochs = 2;
        cfg.finetune_epochs = 2;
        cfg.interp_epochs = 2;
        cfg.base_batch = 4;
        cfg
    }

    #[test]
    fn identical_schedules_give_identical_metrics() {
        let dataset = generate_dataset(12, 3).unwrap();
        let cfg = small_cfg();
        let sched = Schedule::build(&cfg).unwrap();
        let schedules = vec![
            ("a".to_string(), sched.clone()),
            ("b".to_string(), sched),
        ];
        let opts = TrainOptions::new((0..9).collect(), (9..12).collect(), 0);
        let report = compare_schedules(&dataset, &schedules, &[1, 2], &opts).unwrap();
        let a = report.summary("a").unwrap();
        let b = report.summary("b").unwrap();
        assert_eq!(a.mean_val_mse, b.mean_val_mse);
        assert_eq!(a.mean_normalized_cost, b.mean_normalized_cost);
    }

    #[test]
    fn report_structure_and_cost_ordering() {
        let dataset = generate_dataset(12, 4).unwrap();
        let cfg = small_cfg();
        let schedules = vec![
            ("pmrt".to_string(), Schedule::build(&cfg).unwrap()),
            (
                "constant_equal".to_string(),
                Schedule::build_variant(&cfg, Variant::ConstantEqual).unwrap(),
            ),
            (
                "r512_only".to_string(),
                Schedule::single_resolution(&cfg, 2).unwrap(),
            ),
        ];
        let opts = TrainOptions::new((0..9).collect(), (9..12).collect(), 0);
        let seeds = [5u64, 6];
        let report = compare_schedules(&dataset, &schedules, &seeds, &opts).unwrap();
        // One row per (schedule, seed).
        assert_eq!(report.rows.len(), 6);
        for (name, _) in &schedules {
            assert_eq!(
                report.rows.iter().filter(|r| &r.schedule == name).count(),
                seeds.len()
            );
        }
        // PMRT must cost strictly less than the R512-only baseline.
        let pmrt = report.summary("pmrt").unwrap();
        let top = report.summary("r512_only").unwrap();
        assert!(pmrt.mean_normalized_cost < top.mean_normalized_cost);

        let csv = report.to_csv();
        assert!(csv.contains("pmrt,5,"));
        assert!(csv.lines().count() >= 6 + 2 + 3);
    }

    #[test]
    fn too_few_schedules_is_an_error() {
        let dataset = generate_dataset(6, 1).unwrap();
        let sched = Schedule::build(&small_cfg()).unwrap();
        let opts = TrainOptions::new((0..4).collect(), (4..6).collect(), 0);
        assert!(matches!(
            compare_schedules(&dataset, &[("only".into(), sched)], &[1], &opts),
            Err(HarnessError::TooFewSchedules(1))
        ));
    }
}
