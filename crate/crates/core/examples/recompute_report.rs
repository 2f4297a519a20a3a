//! Rebuilds a task report from its records and writes the plot CSVs.
//!
//! ```text
//! cargo run --release --example recompute_report -- /tmp/bbaudio-demo/task1
//! ```

use bbaudio::harness::{recompute_report, render_report};

fn main() -> bbaudio::Result<()> {
    let dir = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "bbaudio-demo/task1".into()));
    let report = recompute_report(&dir)?;
    println!(
        "{} report matches its records (config {})",
        report.task,
        &report.config_hash[..12]
    );
    for path in render_report(&report, &dir.join("plots"))? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
