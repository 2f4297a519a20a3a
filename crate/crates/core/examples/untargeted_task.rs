//! Runs a reduced untargeted experiment (error rates, detection, σ sweep)
//! and prints the headline numbers. Pass `--full` for the default pool size.
//!
//! ```text
//! cargo run --release --example untargeted_task -- /tmp/bbaudio-demo
//! ```

use bbaudio::harness::{run_task1, ExperimentConfig};

fn main() -> bbaudio::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut config = ExperimentConfig::default();
    config.output_dir = args
        .iter()
        .find(|a| !a.starts_with("--"))
        .cloned()
        .unwrap_or_else(|| "bbaudio-demo".into())
        .into();
    if !args.iter().any(|a| a == "--full") {
        config.task1.pool_per_family = 10;
    }
    let report = run_task1(&config)?;
    let t1 = report.task1.as_ref().expect("task1 metrics");
    for (name, c) in &t1.conditions {
        println!("{name:<13} error {:?}%", c.error_rate);
    }
    for (name, d) in &t1.detection {
        println!(
            "{name:<4} AUC {:?} FP {:?}% FN {:?}%",
            d.auc, d.false_positive_rate, d.false_negative_rate
        );
    }
    for p in &t1.sigma_sweep {
        println!("sigma x{:<5} AUC {:?}", p.sigma_scale, p.auc);
    }
    println!("report at {}", config.output_dir.join("task1/report.json").display());
    Ok(())
}
