//! Scores clean, noisy and attacked clips with the calibrated dispersion
//! detector and prints each Wasserstein distance and decision.
//!
//! ```text
//! cargo run --release --example wasserstein_detector -- /tmp/bbaudio-demo
//! ```

use bbaudio::attack::{gaussian_baseline, zeroth_order_attack, AttackConfig, QueryOracle};
use bbaudio::dataset::Split;
use bbaudio::detect::detect;
use bbaudio::harness::{prepare, ExperimentConfig};

fn main() -> bbaudio::Result<()> {
    let config = ExperimentConfig {
        output_dir: std::env::args().nth(1).unwrap_or_else(|| "bbaudio-demo".into()).into(),
        ..ExperimentConfig::default()
    };
    let art = prepare(&config)?;
    println!("threshold {:.4}", art.reference.threshold);
    let eval = art.manifest.load_split(Split::Eval)?;

    for (i, (clip, label)) in eval.iter().step_by(50).enumerate() {
        let noisy = gaussian_baseline(clip, 10.0, i as u64)?;
        let mut oracle = QueryOracle::new(&art.model, 10_000);
        let adv = zeroth_order_attack(&mut oracle, clip, *label, &AttackConfig::default())?;
        for (kind, c) in [("clean", clip), ("noise", &noisy), ("attack", &adv.clip)] {
            let s = detect(&art.bnn, &art.reference, c)?;
            println!(
                "{:<24} {kind:<6} distance {:.4} flagged {}",
                clip.id(),
                s.distance,
                s.adversarial
            );
        }
    }
    Ok(())
}
