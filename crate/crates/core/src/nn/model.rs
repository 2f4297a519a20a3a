use serde::{Deserialize, Serialize};

use super::{softmax, softmax_cross_entropy, LayerSpec, Sequential, Tensor};
use crate::dataset::NUM_CLASSES;
use crate::dsp::features::MelExtractor;
use crate::dsp::{AudioClip, SAMPLE_RATE};
use crate::{seed, Error, Result};

/// Divisor applied to mean-removed log-mel features.
const FEATURE_SCALE: f64 = 4.0;

/// Log-mel feature frontend bound to a fixed input geometry.
///
/// Features are natural-log mel energies with the per-clip global mean removed
/// (level invariance), divided by a constant.
#[derive(Debug, Clone)]
pub struct Frontend {
    sample_rate: u32,
    clip_len: usize,
    extractor: MelExtractor,
}

impl PartialEq for Frontend {
    fn eq(&self, other: &Self) -> bool {
        self.sample_rate == other.sample_rate && self.clip_len == other.clip_len && self.n_mels() == other.n_mels()
    }
}

impl Frontend {
    pub fn new(sample_rate: u32, clip_len: usize, n_mels: usize) -> Self {
        Self {
            sample_rate,
            clip_len,
            extractor: MelExtractor::new(sample_rate, n_mels),
        }
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn clip_len(&self) -> usize {
        self.clip_len
    }

    pub fn n_mels(&self) -> usize {
        self.extractor.n_mels()
    }

    pub fn check(&self, clip: &AudioClip) -> Result<()> {
        if clip.sample_rate() != self.sample_rate || clip.len() != self.clip_len {
            return Err(Error::InvalidArgument(format!(
                "model expects {} samples at {} Hz, got {} at {} Hz",
                self.clip_len,
                self.sample_rate,
                clip.len(),
                clip.sample_rate()
            )));
        }
        Ok(())
    }

    pub fn features(&self, clip: &AudioClip) -> Result<Tensor> {
        self.check(clip)?;
        let (frames, mut f) = self.extractor.log_mel(clip.samples())?;
        let mean = f.iter().sum::<f64>() / f.len() as f64;
        f.iter_mut().for_each(|v| *v = (*v - mean) / FEATURE_SCALE);
        Tensor::new(vec![frames, self.n_mels()], f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub n_mels: usize,
    pub conv1_channels: usize,
    pub conv2_channels: usize,
    pub kernel: usize,
    pub hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n_mels: 40,
            conv1_channels: 16,
            conv2_channels: 16,
            kernel: 5,
            hidden: 64,
        }
    }
}

impl ModelConfig {
    pub fn layers(&self) -> Vec<LayerSpec> {
        vec![
            LayerSpec::Conv1d {
                in_ch: self.n_mels,
                out_ch: self.conv1_channels,
                kernel: self.kernel,
            },
            LayerSpec::Relu,
            LayerSpec::Conv1d {
                in_ch: self.conv1_channels,
                out_ch: self.conv2_channels,
                kernel: self.kernel,
            },
            LayerSpec::Relu,
            LayerSpec::MeanPool,
            LayerSpec::Dense {
                in_dim: self.conv2_channels,
                out_dim: self.hidden,
            },
            LayerSpec::Relu,
            LayerSpec::Dense {
                in_dim: self.hidden,
                out_dim: NUM_CLASSES,
            },
        ]
    }
}

/// Deterministic conv → pool → dense classifier over log-mel frames.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub frontend: Frontend,
    pub net: Sequential,
}

impl ClassifierModel {
    /// Layers `[0, TRUNK_END)` form the feature trunk (ending in the time pool).
    pub const TRUNK_END: usize = 5;
    /// Index of the hidden dense layer.
    pub const HIDDEN: usize = 5;
    /// Index of the output dense layer.
    pub const OUTPUT: usize = 7;

    /// Fresh model; the output layer starts at zero so predictions are uniform.
    pub fn new(config: &ModelConfig, seed_value: u64) -> Self {
        let mut rng = seed::rng(seed::derive(seed_value, &[seed::tag("init")]));
        let mut net = Sequential::init(config.layers(), &mut rng);
        net.zero_layer(Self::OUTPUT);
        Self {
            frontend: Frontend::new(SAMPLE_RATE, SAMPLE_RATE as usize, config.n_mels),
            net,
        }
    }

    pub fn features(&self, clip: &AudioClip) -> Result<Tensor> {
        self.frontend.features(clip)
    }

    pub fn logits(&self, features: &Tensor) -> Result<Vec<f64>> {
        Ok(self.net.forward(features)?.into_data())
    }

    /// Posterior over the ten classes.
    pub fn forward(&self, clip: &AudioClip) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(&self.features(clip)?)?))
    }

    pub fn predict(&self, clip: &AudioClip) -> Result<usize> {
        Ok(argmax(&self.forward(clip)?))
    }

    pub fn loss_and_grad(&self, batch: &[(&AudioClip, usize)]) -> Result<(f64, Vec<f64>)> {
        let feats = batch
            .iter()
            .map(|(c, l)| Ok((self.features(c)?, *l)))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<(&Tensor, usize)> = feats.iter().map(|(f, l)| (f, *l)).collect();
        self.loss_and_grad_features(&refs)
    }

    /// Mean cross-entropy over the batch and its exact parameter gradient.
    pub fn loss_and_grad_features(&self, batch: &[(&Tensor, usize)]) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let mut grad = vec![0.0; self.net.param_count()];
        let mut loss = 0.0;
        let scale = 1.0 / batch.len() as f64;
        for (x, label) in batch {
            if *label >= NUM_CLASSES {
                return Err(Error::LabelOutOfRange(*label));
            }
            let tape = self.net.forward_tape(x)?;
            let (l, mut g) = softmax_cross_entropy(tape.output().data(), *label);
            loss += l * scale;
            g.iter_mut().for_each(|v| *v *= scale);
            self.net.backward(&tape, &Tensor::vector(g), &mut grad);
        }
        Ok((loss, grad))
    }
}

pub fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) },
        )
        .0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synthesize_clip;
    use rand::Rng;

    fn small_config() -> ModelConfig {
        ModelConfig {
            n_mels: 8,
            conv1_channels: 3,
            conv2_channels: 3,
            kernel: 3,
            hidden: 4,
        }
    }

    #[test]
    fn fresh_model_is_uniform() {
        let model = ClassifierModel::new(&ModelConfig::default(), 1);
        let clip = synthesize_clip(3, 5, "c").unwrap();
        let p = model.forward(&clip).unwrap();
        assert_eq!(p.len(), 10);
        assert!(p.iter().all(|v| (v - 0.1).abs() < 1e-9));
        let (loss, _) = model.loss_and_grad(&[(&clip, 4)]).unwrap();
        assert!((loss - 10f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn rejects_wrong_geometry_and_labels() {
        let model = ClassifierModel::new(&ModelConfig::default(), 1);
        let short = AudioClip::new(vec![0.1; 8000], 16000, "s").unwrap();
        assert!(model.forward(&short).is_err());
        let clip = synthesize_clip(0, 1, "c").unwrap();
        assert!(matches!(
            model.loss_and_grad(&[(&clip, 10)]),
            Err(Error::LabelOutOfRange(10))
        ));
        assert!(model.loss_and_grad(&[]).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut model = ClassifierModel::new(&small_config(), 2);
        let mut rng = seed::rng(8);
        // non-zero output layer so every gradient path is exercised
        let r = model.net.layer_range(ClassifierModel::OUTPUT);
        for v in &mut model.net.params_mut()[r] {
            *v = rng.gen_range(-0.5..0.5);
        }
        let clips: Vec<_> = (0..3)
            .map(|c| synthesize_clip(c, 40 + c as u64, "g").unwrap())
            .collect();
        let batch: Vec<(&AudioClip, usize)> = clips.iter().zip([0, 1, 2]).collect();
        let (_, grad) = model.loss_and_grad(&batch).unwrap();
        let eps = 1e-4;
        for _ in 0..20 {
            let i = rng.gen_range(0..grad.len());
            let mut plus = model.clone();
            plus.net.params_mut()[i] += eps;
            let mut minus = model.clone();
            minus.net.params_mut()[i] -= eps;
            let fd = (plus.loss_and_grad(&batch).unwrap().0 - minus.loss_and_grad(&batch).unwrap().0) / (2.0 * eps);
            let err = (grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-8);
            assert!(err < 1e-4, "param {i}: analytic {} fd {fd}", grad[i]);
        }
    }

    #[test]
    fn duplicated_and_shuffled_batches() {
        let model = ClassifierModel::new(&small_config(), 4);
        let clips: Vec<_> = (0..4)
            .map(|c| synthesize_clip(c, 70 + c as u64, "d").unwrap())
            .collect();
        let (single, _) = model.loss_and_grad(&[(&clips[0], 0)]).unwrap();
        let (dup, _) = model.loss_and_grad(&[(&clips[0], 0), (&clips[0], 0)]).unwrap();
        assert!((single - dup).abs() < 1e-12);
        let batch: Vec<(&AudioClip, usize)> = clips.iter().zip([0, 1, 2, 3]).collect();
        let mut rev = batch.clone();
        rev.reverse();
        let (a, _) = model.loss_and_grad(&batch).unwrap();
        let (b, _) = model.loss_and_grad(&rev).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
}
