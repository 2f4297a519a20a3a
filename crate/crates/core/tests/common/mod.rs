#![allow(dead_code)]

pub mod oracles;

use std::path::{Path, PathBuf};
use std::sync::Mutex;

use bbaudio::harness::ExperimentConfig;

/// Scratch root shared by every integration-test binary.
pub fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("bbaudio")
}

/// Default configuration writing under `root()/name`, with one shared corpus.
pub fn config(name: &str) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.output_dir = root().join(name);
    c.corpus.dir = Some(root().join("corpus"));
    c
}

/// Copies trained checkpoints (and their stamps) so another output
/// directory with the same corpus/model/BNN sections skips training.
pub fn share_checkpoints(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).expect("create output dir");
    for name in [
        "model.ckpt",
        "model.ckpt.stamp",
        "bnn.ckpt",
        "bnn.ckpt.stamp",
        "train_curve.csv",
        "bnn_curve.csv",
    ] {
        let src = from.join(name);
        if src.is_file() {
            std::fs::copy(&src, to.join(name)).expect("copy checkpoint");
        }
    }
}

/// A cheap configuration: small pools, small budgets, reusing the default
/// checkpoints.
pub fn tiny(name: &str) -> ExperimentConfig {
    let mut c = config(name);
    c.attack.budget = 300;
    c.calibration.reference_clips = 20;
    c.calibration.pool_clips = 6;
    c.calibration.attacked_clips = 3;
    c.calibration.attack_budget = 300;
    c.task1.pool_per_family = 3;
    c.task1.sigma_sweep = vec![1.0, 0.0];
    c.task2.clips = 2;
    c
}

/// Prepares the default checkpoints once (training if needed) and shares
/// them with `config.output_dir`.
pub fn with_default_checkpoints(config: &ExperimentConfig) {
    static LOCK: Mutex<()> = Mutex::new(());
    let _guard = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let base = self::config("default");
    std::fs::create_dir_all(&base.output_dir).expect("create default dir");
    let manifest =
        bbaudio::dataset::ensure_corpus(base.corpus.seed, base.corpus.per_class, base.corpus_dir()).expect("corpus");
    let model = bbaudio::harness::load_or_train_model(&base, &manifest).expect("train classifier");
    bbaudio::harness::load_or_train_bnn(&base, &manifest, &model).expect("train bnn");
    share_checkpoints(&base.output_dir, &config.output_dir);
}
