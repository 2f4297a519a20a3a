//! Adds white noise at 10 dB SNR and compares accuracy with the clean clips.
//!
//! ```text
//! cargo run --release --example gaussian_noise -- /tmp/bbaudio-demo
//! ```

use bbaudio::attack::gaussian_baseline;
use bbaudio::dataset::Split;
use bbaudio::harness::{prepare, ExperimentConfig};

fn main() -> bbaudio::Result<()> {
    let config = ExperimentConfig {
        output_dir: std::env::args().nth(1).unwrap_or_else(|| "bbaudio-demo".into()).into(),
        ..ExperimentConfig::default()
    };
    let art = prepare(&config)?;
    let eval = art.manifest.load_split(Split::Eval)?;

    let (mut clean_ok, mut noisy_ok) = (0, 0);
    for (i, (clip, label)) in eval.iter().enumerate() {
        clean_ok += usize::from(art.model.predict(clip)? == *label);
        let noisy = gaussian_baseline(clip, 10.0, i as u64)?;
        noisy_ok += usize::from(art.model.predict(&noisy)? == *label);
    }
    let n = eval.len() as f64;
    println!("clean accuracy {:.1}%", 100.0 * clean_ok as f64 / n);
    println!("10 dB noise accuracy {:.1}%", 100.0 * noisy_ok as f64 / n);
    Ok(())
}
