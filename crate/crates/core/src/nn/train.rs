use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::model::argmax;
use super::{Adam, AdamConfig, ClassifierModel, Tensor, TrainState};
use crate::dataset::{Manifest, Split};
use crate::dsp::{scale_noise_to_snr, AudioClip};
use crate::{seed, Error, Result};

/// Additive white-noise augmentation applied to a random subset of batches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseAugment {
    pub prob: f64,
    pub min_snr_db: f64,
    pub max_snr_db: f64,
}

impl Default for NoiseAugment {
    fn default() -> Self {
        Self {
            prob: 0.5,
            min_snr_db: 5.0,
            max_snr_db: 30.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub augment: NoiseAugment,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 16,
            adam: AdamConfig::default(),
            augment: NoiseAugment::default(),
            seed: 17,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub dev_accuracy: f64,
}

/// A clip, its label and its cached clean features.
#[derive(Debug, Clone)]
pub struct LabeledFeatures {
    pub clip: AudioClip,
    pub label: usize,
    pub features: Tensor,
}

pub fn features_for(model: &ClassifierModel, clips: &[(AudioClip, usize)]) -> Result<Vec<LabeledFeatures>> {
    clips
        .iter()
        .map(|(c, l)| {
            Ok(LabeledFeatures {
                clip: c.clone(),
                label: *l,
                features: model.features(c)?,
            })
        })
        .collect()
}

/// Fraction of examples classified correctly from cached features.
pub fn evaluate_features(model: &ClassifierModel, set: &[LabeledFeatures]) -> Result<f64> {
    if set.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0;
    for ex in set {
        if argmax(&model.logits(&ex.features)?) == ex.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / set.len() as f64)
}

pub fn accuracy(model: &ClassifierModel, clips: &[(AudioClip, usize)]) -> Result<f64> {
    evaluate_features(model, &features_for(model, clips)?)
}

/// Adds white noise at a random SNR; shared by classifier and BNN training.
pub(crate) fn augment_clip(clip: &AudioClip, aug: &NoiseAugment, rng: &mut impl Rng) -> Result<AudioClip> {
    let db = if aug.max_snr_db > aug.min_snr_db {
        rng.gen_range(aug.min_snr_db..aug.max_snr_db)
    } else {
        aug.min_snr_db
    };
    let noise: Vec<f64> = (0..clip.len()).map(|_| rng.sample(StandardNormal)).collect();
    let noise = scale_noise_to_snr(clip, &noise, db)?;
    clip.with_samples(clip.samples().iter().zip(&noise).map(|(a, b)| a + b).collect())
}

/// Trains on the manifest's train split, reporting dev accuracy per epoch.
pub fn train(
    model: ClassifierModel,
    manifest: &Manifest,
    config: &TrainConfig,
) -> Result<(ClassifierModel, Vec<EpochStats>)> {
    let train_set = manifest.load_split(Split::Train)?;
    let dev_set = manifest.load_split(Split::Dev)?;
    if train_set.is_empty() || dev_set.is_empty() {
        return Err(Error::InvalidArgument("manifest needs train and dev splits".into()));
    }
    train_on(model, &train_set, &dev_set, config)
}

pub fn train_on(
    mut model: ClassifierModel,
    train_set: &[(AudioClip, usize)],
    dev_set: &[(AudioClip, usize)],
    config: &TrainConfig,
) -> Result<(ClassifierModel, Vec<EpochStats>)> {
    if config.batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be positive".into()));
    }
    let train_feats = features_for(&model, train_set)?;
    let dev_feats = features_for(&model, dev_set)?;
    let mut state = TrainState {
        optimizer: Adam::new(config.adam, model.net.param_count()),
        seed: config.seed,
    };
    let mut rng = seed::rng(seed::derive(state.seed, &[seed::tag("train")]));
    let mut order: Vec<usize> = (0..train_feats.len()).collect();
    let mut curve = Vec::with_capacity(config.epochs);
    let mut step = 0;
    for epoch in 0..config.epochs {
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(config.batch_size) {
            let mut owned = Vec::new();
            let mut batch: Vec<(&Tensor, usize)> = Vec::with_capacity(chunk.len());
            let augment = config.augment.prob > 0.0 && rng.gen_bool(config.augment.prob.min(1.0));
            if augment {
                for &i in chunk {
                    let noisy = augment_clip(&train_feats[i].clip, &config.augment, &mut rng)?;
                    owned.push((model.features(&noisy)?, train_feats[i].label));
                }
                batch.extend(owned.iter().map(|(f, l)| (f, *l)));
            } else {
                batch.extend(chunk.iter().map(|&i| (&train_feats[i].features, train_feats[i].label)));
            }
            let (loss, grad) = model.loss_and_grad_features(&batch)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { epoch, step, loss });
            }
            state.optimizer.step(model.net.params_mut(), &grad);
            epoch_loss += loss;
            batches += 1;
            step += 1;
        }
        curve.push(EpochStats {
            epoch: epoch + 1,
            loss: epoch_loss / batches.max(1) as f64,
            dev_accuracy: evaluate_features(&model, &dev_feats)?,
        });
    }
    Ok((model, curve))
}

/// CSV with columns `epoch,loss,dev_accuracy`.
pub fn write_curve_csv(path: impl AsRef<Path>, curve: &[EpochStats]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("epoch,loss,dev_accuracy\n");
    for e in curve {
        out.push_str(&format!("{},{},{}\n", e.epoch, e.loss, e.dev_accuracy));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synthesize_clip;
    use crate::nn::ModelConfig;

    fn tiny_sets() -> (Vec<(AudioClip, usize)>, Vec<(AudioClip, usize)>) {
        let mk = |n: u64| -> Vec<(AudioClip, usize)> {
            (0..n)
                .map(|i| {
                    let c = (i % 3) as usize;
                    (synthesize_clip(c, 1000 + i, format!("c{i}")).unwrap(), c)
                })
                .collect()
        };
        (mk(6), mk(3))
    }

    #[test]
    fn zero_lr_leaves_parameters() {
        let (tr, dev) = tiny_sets();
        let model = ClassifierModel::new(&ModelConfig::default(), 3);
        let config = TrainConfig {
            epochs: 1,
            batch_size: 3,
            adam: AdamConfig {
                lr: 0.0,
                ..Default::default()
            },
            ..Default::default()
        };
        let (trained, curve) = train_on(model.clone(), &tr, &dev, &config).unwrap();
        assert_eq!(trained.net.params(), model.net.params());
        assert_eq!(curve.len(), 1);
    }

    #[test]
    fn same_seed_same_parameters() {
        let (tr, dev) = tiny_sets();
        let config = TrainConfig {
            epochs: 2,
            batch_size: 2,
            ..Default::default()
        };
        let a = train_on(ClassifierModel::new(&ModelConfig::default(), 3), &tr, &dev, &config).unwrap();
        let b = train_on(ClassifierModel::new(&ModelConfig::default(), 3), &tr, &dev, &config).unwrap();
        assert_eq!(a.0.net.params(), b.0.net.params());
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn curve_csv_has_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("curve.csv");
        write_curve_csv(
            &p,
            &[EpochStats {
                epoch: 1,
                loss: 0.5,
                dev_accuracy: 0.9,
            }],
        )
        .unwrap();
        let s = std::fs::read_to_string(p).unwrap();
        assert!(s.starts_with("epoch,loss,dev_accuracy\n1,0.5,0.9"));
    }
}
