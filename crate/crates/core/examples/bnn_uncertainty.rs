//! Compares the Monte Carlo output spread of the Flipout network on a clean
//! clip and on its adversarial counterpart.
//!
//! ```text
//! cargo run --release --example bnn_uncertainty -- /tmp/bbaudio-demo
//! ```

use bbaudio::attack::{evolutionary_attack, AttackConfig, QueryOracle};
use bbaudio::dataset::Split;
use bbaudio::detect::{bnn_statistic, Statistic};
use bbaudio::harness::{prepare, ExperimentConfig};

fn main() -> bbaudio::Result<()> {
    let config = ExperimentConfig {
        output_dir: std::env::args().nth(1).unwrap_or_else(|| "bbaudio-demo".into()).into(),
        ..ExperimentConfig::default()
    };
    let art = prepare(&config)?;
    let eval = art.manifest.load_split(Split::Eval)?;
    let det = &config.detector;

    for (clip, label) in eval.iter().step_by(50) {
        let mut oracle = QueryOracle::new(&art.model, 10_000);
        let adv = evolutionary_attack(&mut oracle, clip, *label, &AttackConfig::default())?;
        let before = bnn_statistic(&art.bnn, clip, det.passes, det.seed, Statistic::OutputStd)?;
        let after = bnn_statistic(&art.bnn, &adv.clip, det.passes, det.seed, Statistic::OutputStd)?;
        let spread = |h: &[f64]| h.iter().sum::<f64>() / h.len() as f64;
        println!(
            "{}: output std {:.4} -> {:.4}, hidden std {:.4} -> {:.4} (attack success {})",
            clip.id(),
            before.value,
            after.value,
            spread(&before.prediction.hidden_std()),
            spread(&after.prediction.hidden_std()),
            adv.success
        );
    }
    Ok(())
}
