use pmrt::harness::{
    compare_schedules, generate_dataset, stratified_split, TrainOptions,
};
use pmrt::schedule::{Phase, Schedule, ScheduleConfig, Variant};
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let dataset = generate_dataset(200, 2024).unwrap();
    println!("dataset gen: {:.1} s", t0.elapsed().as_secs_f64());

    // Least-squares R^2 per resolution level (normal equations via simple
    // ridge-free solve on standardized features).
    let targets: Vec<f64> = dataset.iter().map(|s| s.target_cd).collect();
    let splits = stratified_split(&targets, &[0.85, 0.15], 10, 7).unwrap();
    let (train, val) = (&splits[0], &splits[1]);
    println!("train {} val {}", train.len(), val.len());

    for level in [0, 2] {
        use nalgebra::{DMatrix, DVector};
        let d = dataset[0].features[level].len();
        let x = DMatrix::from_fn(train.len(), d + 1, |r, c| {
            if c == d { 1.0 } else { dataset[train[r]].features[level][c] }
        });
        let y = DVector::from_iterator(train.len(), train.iter().map(|&i| targets[i]));
        let sol = (&x.transpose() * &x + DMatrix::identity(d + 1, d + 1) * 1e-8)
            .cholesky()
            .unwrap()
            .solve(&(x.transpose() * &y));
        let pred = |i: usize, lv: usize| -> f64 {
            let f = &dataset[i].features[lv];
            f.iter().zip(sol.iter()).map(|(a, b)| a * b).sum::<f64>() + sol[d]
        };
        let val_mse = |lv: usize| -> f64 {
            val.iter().map(|&i| (pred(i, lv) - targets[i]).powi(2)).sum::<f64>() / val.len() as f64
        };
        let var = {
            let m: f64 = val.iter().map(|&i| targets[i]).sum::<f64>() / val.len() as f64;
            val.iter().map(|&i| (targets[i] - m).powi(2)).sum::<f64>() / val.len() as f64
        };
        println!(
            "lstsq fit on level {level}: val_mse(eval@same)={:.3e} val_mse(eval@R512)={:.3e} var={:.3e} R2={:.4}",
            val_mse(level), val_mse(2), var, 1.0 - val_mse(2) / var
        );
    }

    // Criterion 10 shape: cost-leaning PMRT vs R512-only, equal epochs.
    let mut cfg = ScheduleConfig::new(3, 200);
    cfg.warmup_epochs = 10;
    cfg.finetune_epochs = 10;
    cfg.gamma = 0.9;
    cfg.base_batch = 8;
    let pmrt = Schedule::build(&cfg).unwrap();
    let ratios = pmrt.expected_ratios(Some(Phase::Pretrain)).unwrap();
    println!("gamma=0.9 pretrain ratios: {ratios:?}");
    let top = Schedule::single_resolution(&cfg, 2).unwrap();
    let mut opts = TrainOptions::new(train.clone(), val.clone(), 0);
    opts.batches_per_epoch = 8;
    let t1 = Instant::now();
    let report = compare_schedules(
        &dataset,
        &[("pmrt".into(), pmrt), ("r512_only".into(), top)],
        &[0, 1, 2],
        &opts,
    )
    .unwrap();
    println!("compare-2 took {:.1} s", t1.elapsed().as_secs_f64());
    let p = report.summary("pmrt").unwrap();
    let t = report.summary("r512_only").unwrap();
    println!(
        "PMRT mse {:.4e}±{:.1e} cost {:.1} | R512 mse {:.4e}±{:.1e} cost {:.1} | cost ratio {:.4} mse ratio {:.4}",
        p.mean_val_mse, p.std_val_mse, p.mean_normalized_cost,
        t.mean_val_mse, t.std_val_mse, t.mean_normalized_cost,
        p.mean_normalized_cost / t.mean_normalized_cost,
        p.mean_val_mse / t.mean_val_mse
    );

    // Criterion 11 shape: default PMRT vs ablation variants.
    let mut cfg11 = ScheduleConfig::new(3, 200);
    cfg11.warmup_epochs = 10;
    cfg11.finetune_epochs = 10;
    cfg11.base_batch = 8;
    let schedules = vec![
        ("pmrt_default".to_string(), Schedule::build(&cfg11).unwrap()),
        (
            "constant_equal".to_string(),
            Schedule::build_variant(&cfg11, Variant::ConstantEqual).unwrap(),
        ),
        (
            "hard_switch".to_string(),
            Schedule::build_variant(&cfg11, Variant::HardSwitch).unwrap(),
        ),
    ];
    let t2 = Instant::now();
    let report = compare_schedules(&dataset, &schedules, &[0, 1, 2], &opts).unwrap();
    println!("compare-3 took {:.1} s", t2.elapsed().as_secs_f64());
    for name in ["pmrt_default", "constant_equal", "hard_switch"] {
        let s = report.summary(name).unwrap();
        println!(
            "{name}: mse {:.6e} ± {:.2e}  cost {:.1}",
            s.mean_val_mse, s.std_val_mse, s.mean_normalized_cost
        );
    }
}
