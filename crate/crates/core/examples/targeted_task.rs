//! Runs a reduced targeted experiment and prints the unsuccessful-rate matrix
//! for every attack family and defense.
//!
//! ```text
//! cargo run --release --example targeted_task -- /tmp/bbaudio-demo
//! ```

use bbaudio::harness::{run_task2, ExperimentConfig};

fn main() -> bbaudio::Result<()> {
    let mut config = ExperimentConfig {
        output_dir: std::env::args().nth(1).unwrap_or_else(|| "bbaudio-demo".into()).into(),
        ..ExperimentConfig::default()
    };
    config.task2.clips = 4;
    let report = run_task2(&config)?;
    let t2 = report.task2.as_ref().expect("task2 metrics");
    println!("target {}", t2.target_label);
    for (family, row) in &t2.unsuccessful_rate {
        for (defense, cell) in row {
            println!(
                "{family:<13} {defense:<5} UR {:?}% ({} of {} succeeded, {} caught)",
                cell.unsuccessful_rate, cell.successes, cell.attempts, cell.caught
            );
        }
    }
    Ok(())
}
