//! Runs a targeted zeroth-order attack: random-direction finite differences
//! in a low-dimensional subspace, then projected sign steps.
//!
//! ```text
//! cargo run --release --example zeroth_order_attack -- /tmp/bbaudio-demo
//! ```

use bbaudio::attack::{zeroth_order_attack, AttackConfig, AttackMode, QueryOracle};
use bbaudio::dataset::Split;
use bbaudio::harness::{label_name, prepare, ExperimentConfig};

fn main() -> bbaudio::Result<()> {
    let config = ExperimentConfig {
        output_dir: std::env::args().nth(1).unwrap_or_else(|| "bbaudio-demo".into()).into(),
        ..ExperimentConfig::default()
    };
    let art = prepare(&config)?;
    let eval = art.manifest.load_split(Split::Eval)?;
    let target = config.target_index();

    for (i, (clip, label)) in eval.iter().step_by(40).filter(|(_, l)| *l != target).enumerate() {
        let cfg = AttackConfig {
            delta_max: 0.02,
            mode: AttackMode::Targeted(target),
            seed: i as u64,
            ..AttackConfig::default()
        };
        let mut oracle = QueryOracle::new(&art.model, cfg.budget);
        let r = zeroth_order_attack(&mut oracle, clip, *label, &cfg)?;
        println!(
            "{} ({} -> {}): success {} after {} queries, {} iterations",
            clip.id(),
            label_name(*label),
            label_name(target),
            r.success,
            r.queries_used,
            r.loss_trace.len()
        );
    }
    Ok(())
}
