//! Generates the synthetic corpus, trains the deterministic classifier and
//! writes a checkpoint plus its training curve.
//!
//! ```text
//! cargo run --release --example train_classifier -- /tmp/bbaudio-demo
//! ```

use std::time::Instant;

use bbaudio::dataset::{ensure_corpus, Split};
use bbaudio::nn::{accuracy, checkpoint, train, write_curve_csv, ClassifierModel, ModelConfig, TrainConfig};

fn main() -> bbaudio::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "bbaudio-demo".into());
    let out = std::path::PathBuf::from(out);
    let manifest = ensure_corpus(7, 100, out.join("corpus"))?;
    println!("corpus: {} clips", manifest.entries.len());

    let start = Instant::now();
    let model = ClassifierModel::new(&ModelConfig::default(), 7);
    let (model, curve) = train(model, &manifest, &TrainConfig::default())?;
    for e in &curve {
        println!(
            "epoch {:>2}  loss {:.4}  dev acc {:.3}",
            e.epoch, e.loss, e.dev_accuracy
        );
    }
    println!("trained in {:.1}s", start.elapsed().as_secs_f64());

    let eval = manifest.load_split(Split::Eval)?;
    println!("eval accuracy {:.3}", accuracy(&model, &eval)?);

    let start = Instant::now();
    for (clip, _) in eval.iter().take(50) {
        model.forward(clip)?;
    }
    println!("forward: {:.3} ms/clip", start.elapsed().as_secs_f64() * 1000.0 / 50.0);

    checkpoint::save_classifier(&model, out.join("model.ckpt"))?;
    write_curve_csv(out.join("curve.csv"), &curve)?;
    Ok(())
}
