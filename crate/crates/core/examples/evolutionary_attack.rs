//! Runs the evolutionary attack against the trained classifier on a few
//! eval clips and prints success, queries, similarity and SNR.
//!
//! ```text
//! cargo run --release --example evolutionary_attack -- /tmp/bbaudio-demo
//! ```

use bbaudio::attack::{evolutionary_attack, AttackConfig, QueryOracle};
use bbaudio::dataset::Split;
use bbaudio::harness::{prepare, ExperimentConfig};

fn main() -> bbaudio::Result<()> {
    let config = ExperimentConfig {
        output_dir: std::env::args().nth(1).unwrap_or_else(|| "bbaudio-demo".into()).into(),
        ..ExperimentConfig::default()
    };
    let art = prepare(&config)?;
    let eval = art.manifest.load_split(Split::Eval)?;

    for (i, (clip, label)) in eval.iter().step_by(40).enumerate() {
        let cfg = AttackConfig {
            seed: i as u64,
            ..AttackConfig::default()
        };
        let mut oracle = QueryOracle::new(&art.model, cfg.budget);
        let r = evolutionary_attack(&mut oracle, clip, *label, &cfg)?;
        println!(
            "{}: success {} after {} queries, loss {:.3}, MFCC similarity {:.3}, SNR {:.1} dB",
            clip.id(),
            r.success,
            r.queries_used,
            r.final_loss,
            r.similarity,
            r.snr_db.unwrap_or(f64::INFINITY)
        );
    }
    Ok(())
}
