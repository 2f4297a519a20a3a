//! Applies local smoothing, downsampling and the temporal-dependency check
//! to clean and attacked clips.
//!
//! ```text
//! cargo run --release --example defenses -- /tmp/bbaudio-demo
//! ```

use bbaudio::attack::{evolutionary_attack, AttackConfig, QueryOracle};
use bbaudio::dataset::Split;
use bbaudio::detect::{td_detector, Defense, TD_SEGMENTS};
use bbaudio::dsp::SmoothKind;
use bbaudio::harness::{prepare, ExperimentConfig};

fn main() -> bbaudio::Result<()> {
    let config = ExperimentConfig {
        output_dir: std::env::args().nth(1).unwrap_or_else(|| "bbaudio-demo".into()).into(),
        ..ExperimentConfig::default()
    };
    let art = prepare(&config)?;
    let eval = art.manifest.load_split(Split::Eval)?;
    let defenses = [
        Defense::None,
        Defense::LocalSmoothing {
            window: 3,
            smoothing: SmoothKind::Median,
        },
        Defense::Downsampling,
    ];

    for (clip, label) in eval.iter().step_by(50) {
        let mut oracle = QueryOracle::new(&art.model, 10_000);
        let adv = evolutionary_attack(&mut oracle, clip, *label, &AttackConfig::default())?;
        for (kind, c) in [("clean", clip), ("attack", &adv.clip)] {
            let mut line = format!("{:<24} {kind:<6} label {label}", clip.id());
            for d in defenses {
                line += &format!("  {}:{}", d.name(), art.model.predict(&d.apply(c)?)?);
            }
            line += &format!("  td score {:.3}", td_detector(&art.model, c, TD_SEGMENTS)?);
            println!("{line}");
        }
    }
    Ok(())
}
