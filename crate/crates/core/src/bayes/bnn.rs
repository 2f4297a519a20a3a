use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::variational::{flipout_backward, flipout_forward, kl_gaussian, kl_gradient, VariationalDense};
use crate::dataset::NUM_CLASSES;
use crate::dsp::AudioClip;
use crate::nn::checkpoint::{self, ModelKind, Reader, Writer};
use crate::nn::{
    argmax, augment_clip, softmax, softmax_cross_entropy, Adam, AdamConfig, ClassifierModel, EpochStats, Frontend,
    LayerSpec, NoiseAugment, Sequential, Tensor,
};
use crate::{seed, Error, Result};

/// Classifier with one Flipout layer in place of the last hidden dense:
/// deterministic trunk → variational dense → relu → output dense.
#[derive(Debug, Clone, PartialEq)]
pub struct BnnClassifier {
    pub frontend: Frontend,
    pub trunk: Sequential,
    pub variational: VariationalDense,
    pub head: Sequential,
}

/// Result of `T` stochastic passes over one input.
#[derive(Debug, Clone, PartialEq)]
pub struct McPrediction {
    pub mean_probs: Vec<f64>,
    /// Per-pass class posteriors `[T × C]`.
    pub probs: Vec<Vec<f64>>,
    /// Per-pass pre-activation hidden vectors `[T × H]`.
    pub hidden: Vec<Vec<f64>>,
}

impl McPrediction {
    pub fn predicted(&self) -> usize {
        argmax(&self.mean_probs)
    }

    /// Per-unit standard deviation of the hidden samples across passes.
    pub fn hidden_std(&self) -> Vec<f64> {
        column_std(&self.hidden)
    }
}

pub(crate) fn column_std(rows: &[Vec<f64>]) -> Vec<f64> {
    let t = rows.len() as f64;
    let h = rows.first().map_or(0, Vec::len);
    (0..h)
        .map(|j| {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / t;
            (rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / t).sqrt()
        })
        .collect()
}

impl BnnClassifier {
    /// Warm start from a trained classifier: the hidden dense becomes the
    /// variational means, every σ starts at `init_sigma`.
    pub fn from_classifier(model: &ClassifierModel, init_sigma: f64, prior_sigma: f64) -> Result<Self> {
        let net = &model.net;
        let hidden = ClassifierModel::HIDDEN;
        let (in_dim, out_dim) = match net.layers().get(hidden) {
            Some(LayerSpec::Dense { in_dim, out_dim }) => (*in_dim, *out_dim),
            _ => return Err(Error::Shape("classifier has no hidden dense layer".into())),
        };
        let p = &net.params()[net.layer_range(hidden)];
        let (w, b) = p.split_at(in_dim * out_dim);
        Ok(Self {
            frontend: model.frontend.clone(),
            trunk: net.slice(0..ClassifierModel::TRUNK_END),
            variational: VariationalDense::new(in_dim, out_dim, w, b, init_sigma, prior_sigma)?,
            head: net.slice(hidden + 1..net.layers().len()),
        })
    }

    /// Same model with every posterior σ multiplied by `scale`.
    pub fn with_sigma_scale(&self, scale: f64) -> Self {
        let mut out = self.clone();
        out.variational = out.variational.with_sigma_scale(scale);
        out
    }

    pub fn hidden_width(&self) -> usize {
        self.variational.out_dim()
    }

    /// Parameter count in gradient layout `[trunk, variational, head]`.
    pub fn param_count(&self) -> usize {
        self.trunk.param_count() + self.variational.param_count() + self.head.param_count()
    }

    /// Trunk output (pooled conv features) for one clip.
    pub fn embed(&self, clip: &AudioClip) -> Result<Vec<f64>> {
        Ok(self.trunk.forward(&self.frontend.features(clip)?)?.into_data())
    }

    /// One Flipout call over a batch of embeddings; returns logits and
    /// pre-activation hidden vectors per example.
    pub fn forward_embeddings(&self, embeds: &[&[f64]], seed_value: u64) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let out = flipout_forward(&self.variational, embeds, seed_value)?;
        let logits = out
            .outputs
            .iter()
            .map(|h| Ok(self.head.forward(&Tensor::vector(h.clone()))?.into_data()))
            .collect::<Result<Vec<_>>>()?;
        Ok((logits, out.outputs))
    }

    /// `T` independent single-example passes; pass `t` uses seed
    /// `derive(seed, [t])`.
    pub fn mc_predict_embedding(&self, embed: &[f64], passes: usize, seed_value: u64) -> Result<McPrediction> {
        if passes < 2 {
            return Err(Error::InvalidArgument("mc_predict needs at least 2 passes".into()));
        }
        let mut probs = Vec::with_capacity(passes);
        let mut hidden = Vec::with_capacity(passes);
        for t in 0..passes {
            let (mut logits, mut h) = self.forward_embeddings(&[embed], seed::derive(seed_value, &[t as u64]))?;
            probs.push(softmax(&logits.pop().expect("one row")));
            hidden.push(h.pop().expect("one row"));
        }
        let c = probs[0].len();
        let mean_probs = (0..c)
            .map(|k| probs.iter().map(|p| p[k]).sum::<f64>() / passes as f64)
            .collect();
        Ok(McPrediction {
            mean_probs,
            probs,
            hidden,
        })
    }

    pub fn mc_predict(&self, clip: &AudioClip, passes: usize, seed_value: u64) -> Result<McPrediction> {
        self.mc_predict_embedding(&self.embed(clip)?, passes, seed_value)
    }

    /// Prediction with every weight at its posterior mean.
    pub fn mean_predict(&self, clip: &AudioClip) -> Result<Vec<f64>> {
        let h = self.variational.mean_forward(&self.embed(clip)?);
        Ok(softmax(&self.head.forward(&Tensor::vector(h))?.into_data()))
    }

    /// ELBO objective and gradient over `[variational, head]` given cached
    /// trunk embeddings. Returns the gradient with respect to the embeddings
    /// as well.
    fn elbo_from_embeddings(
        &self,
        batch: &[(&[f64], usize)],
        seed_value: u64,
        kl_weight: f64,
    ) -> Result<(f64, Vec<f64>, Vec<Vec<f64>>)> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let nv = self.variational.param_count();
        let mut grad = vec![0.0; nv + self.head.param_count()];
        let embeds: Vec<&[f64]> = batch.iter().map(|(e, _)| *e).collect();
        let out = flipout_forward(&self.variational, &embeds, seed_value)?;
        let scale = 1.0 / batch.len() as f64;
        let mut nll = 0.0;
        let mut g_hidden = Vec::with_capacity(batch.len());
        for ((_, label), h) in batch.iter().zip(&out.outputs) {
            if *label >= NUM_CLASSES {
                return Err(Error::LabelOutOfRange(*label));
            }
            let tape = self.head.forward_tape(&Tensor::vector(h.clone()))?;
            let (l, mut g) = softmax_cross_entropy(tape.output().data(), *label);
            nll += l * scale;
            g.iter_mut().for_each(|v| *v *= scale);
            let gh = self.head.backward(&tape, &Tensor::vector(g), &mut grad[nv..]);
            g_hidden.push(gh.into_data());
        }
        let g_embed = flipout_backward(&self.variational, &embeds, &out.noise, &g_hidden, &mut grad[..nv]);
        let mut loss = nll;
        if kl_weight != 0.0 {
            loss += kl_weight * kl_gaussian(&self.variational);
            kl_gradient(&self.variational, kl_weight, &mut grad[..nv]);
        }
        Ok((loss, grad, g_embed))
    }

    /// Negative ELBO on a batch of feature tensors: mean NLL under one Flipout
    /// sample plus `kl_weight · KL`. Gradient layout `[trunk, variational, head]`.
    pub fn elbo_loss(&self, batch: &[(&Tensor, usize)], seed_value: u64, kl_weight: f64) -> Result<(f64, Vec<f64>)> {
        let tapes = batch
            .iter()
            .map(|(x, _)| self.trunk.forward_tape(x))
            .collect::<Result<Vec<_>>>()?;
        let embeds: Vec<Vec<f64>> = tapes.iter().map(|t| t.output().data().to_vec()).collect();
        let inner: Vec<(&[f64], usize)> = embeds.iter().zip(batch).map(|(e, (_, l))| (e.as_slice(), *l)).collect();
        let (loss, tail, g_embed) = self.elbo_from_embeddings(&inner, seed_value, kl_weight)?;
        let nt = self.trunk.param_count();
        let mut grad = vec![0.0; nt];
        for (tape, ge) in tapes.iter().zip(g_embed) {
            self.trunk.backward(tape, &Tensor::vector(ge), &mut grad);
        }
        grad.extend(tail);
        Ok((loss, grad))
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut p = self.trunk.params().to_vec();
        p.extend_from_slice(self.variational.params());
        p.extend_from_slice(self.head.params());
        p
    }

    pub fn set_params_flat(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.param_count() {
            return Err(Error::Shape(format!("{} params vs {}", p.len(), self.param_count())));
        }
        let (a, rest) = p.split_at(self.trunk.param_count());
        let (b, c) = rest.split_at(self.variational.param_count());
        self.trunk.params_mut().copy_from_slice(a);
        self.variational.params_mut().copy_from_slice(b);
        self.head.params_mut().copy_from_slice(c);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BnnTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub init_sigma: f64,
    pub prior_sigma: f64,
    /// `None` means `1 / N_train`.
    pub kl_weight: Option<f64>,
    /// Noisy copies of each training clip added to the cached embeddings.
    pub augmented_copies: usize,
    pub augment: NoiseAugment,
    /// MC passes used for dev accuracy.
    pub eval_passes: usize,
    pub seed: u64,
}

impl Default for BnnTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 16,
            adam: AdamConfig::default(),
            init_sigma: 0.05,
            prior_sigma: 1.0,
            kl_weight: None,
            augmented_copies: 1,
            augment: NoiseAugment {
                prob: 1.0,
                ..NoiseAugment::default()
            },
            eval_passes: 8,
            seed: 23,
        }
    }
}

/// MC-averaged accuracy on labelled clips.
pub fn bnn_accuracy(
    model: &BnnClassifier,
    clips: &[(AudioClip, usize)],
    passes: usize,
    seed_value: u64,
) -> Result<f64> {
    if clips.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0;
    for (i, (clip, label)) in clips.iter().enumerate() {
        let p = model.mc_predict(clip, passes, seed::derive(seed_value, &[i as u64]))?;
        correct += usize::from(p.predicted() == *label);
    }
    Ok(correct as f64 / clips.len() as f64)
}

/// ELBO training of the variational layer and output head; the trunk is kept
/// fixed and its embeddings are computed once.
pub fn train_bnn(
    mut model: BnnClassifier,
    train_set: &[(AudioClip, usize)],
    dev_set: &[(AudioClip, usize)],
    config: &BnnTrainConfig,
) -> Result<(BnnClassifier, Vec<EpochStats>)> {
    if train_set.is_empty() || config.batch_size == 0 {
        return Err(Error::InvalidArgument(
            "BNN training needs data and a positive batch size".into(),
        ));
    }
    let kl_weight = config.kl_weight.unwrap_or(1.0 / train_set.len() as f64);
    let mut rng = seed::rng(seed::derive(config.seed, &[seed::tag("bnn-train")]));
    let mut cache: Vec<(Vec<f64>, usize)> = Vec::with_capacity(train_set.len() * (1 + config.augmented_copies));
    for (clip, label) in train_set {
        cache.push((model.embed(clip)?, *label));
        for _ in 0..config.augmented_copies {
            let noisy = augment_clip(clip, &config.augment, &mut rng)?;
            cache.push((model.embed(&noisy)?, *label));
        }
    }
    let dev: Vec<(Vec<f64>, usize)> = dev_set
        .iter()
        .map(|(c, l)| Ok((model.embed(c)?, *l)))
        .collect::<Result<_>>()?;
    let nv = model.variational.param_count();
    let mut opt = Adam::new(config.adam, nv + model.head.param_count());
    let mut order: Vec<usize> = (0..cache.len()).collect();
    let mut curve = Vec::with_capacity(config.epochs);
    let mut step = 0u64;
    for epoch in 0..config.epochs {
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(&[f64], usize)> = chunk.iter().map(|&i| (cache[i].0.as_slice(), cache[i].1)).collect();
            let s = seed::derive(config.seed, &[seed::tag("flipout"), step]);
            let (loss, grad, _) = model.elbo_from_embeddings(&batch, s, kl_weight)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged {
                    epoch,
                    step: step as usize,
                    loss,
                });
            }
            let mut params = model.variational.params().to_vec();
            params.extend_from_slice(model.head.params());
            opt.step(&mut params, &grad);
            model.variational.params_mut().copy_from_slice(&params[..nv]);
            model.head.params_mut().copy_from_slice(&params[nv..]);
            total += loss;
            batches += 1;
            step += 1;
        }
        let mut correct = 0;
        for (i, (e, l)) in dev.iter().enumerate() {
            let p = model.mc_predict_embedding(
                e,
                config.eval_passes.max(2),
                seed::derive(config.seed, &[epoch as u64, i as u64]),
            )?;
            correct += usize::from(p.predicted() == *l);
        }
        curve.push(EpochStats {
            epoch: epoch + 1,
            loss: total / batches.max(1) as f64,
            dev_accuracy: if dev.is_empty() {
                0.0
            } else {
                correct as f64 / dev.len() as f64
            },
        });
    }
    Ok((model, curve))
}

pub fn bnn_to_bytes(model: &BnnClassifier) -> Vec<u8> {
    let mut w = Writer::default();
    checkpoint::write_header(&mut w, ModelKind::Bnn, &model.frontend);
    checkpoint::write_sequential(&mut w, &model.trunk);
    let v = &model.variational;
    w.u32(v.in_dim() as u32);
    w.u32(v.out_dim() as u32);
    w.f64(v.prior_sigma());
    w.f64s(v.params());
    checkpoint::write_sequential(&mut w, &model.head);
    w.finish()
}

pub fn bnn_from_bytes(bytes: &[u8]) -> Result<BnnClassifier> {
    let mut r = Reader::new(bytes);
    let frontend = checkpoint::read_header(&mut r, ModelKind::Bnn)?;
    let trunk = checkpoint::read_sequential(&mut r)?;
    let in_dim = r.u32()? as usize;
    let out_dim = r.u32()? as usize;
    let prior = r.f64()?;
    let params = r.f64s()?;
    let variational =
        VariationalDense::from_params(in_dim, out_dim, params, prior).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let head = checkpoint::read_sequential(&mut r)?;
    r.finish()?;
    Ok(BnnClassifier {
        frontend,
        trunk,
        variational,
        head,
    })
}

pub fn save_bnn(model: &BnnClassifier, path: impl AsRef<Path>) -> Result<()> {
    checkpoint::write_file(path.as_ref(), bnn_to_bytes(model))
}

pub fn load_bnn(path: impl AsRef<Path>) -> Result<BnnClassifier> {
    bnn_from_bytes(&checkpoint::read_file(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synthesize_clip;
    use crate::nn::ModelConfig;

    fn small() -> BnnClassifier {
        let cfg = ModelConfig {
            n_mels: 8,
            conv1_channels: 3,
            conv2_channels: 3,
            kernel: 3,
            hidden: 5,
        };
        let mut m = ClassifierModel::new(&cfg, 4);
        let mut rng = seed::rng(8);
        for p in m.net.params_mut() {
            *p += rng.gen_range(-0.3..0.3);
        }
        BnnClassifier::from_classifier(&m, 0.2, 1.0).unwrap()
    }

    #[test]
    fn checkpoint_roundtrip() {
        let m = small();
        let back = bnn_from_bytes(&bnn_to_bytes(&m)).unwrap();
        assert_eq!(back, m);
        let mut bytes = bnn_to_bytes(&m);
        bytes.truncate(bytes.len() - 3);
        assert!(bnn_from_bytes(&bytes).is_err());
    }

    #[test]
    fn zero_sigma_passes_agree() {
        let m = small().with_sigma_scale(0.0);
        let clip = synthesize_clip(2, 3, "c").unwrap();
        let p = m.mc_predict(&clip, 4, 1).unwrap();
        assert!(p.hidden.windows(2).all(|w| w[0] == w[1]));
        assert!(p.hidden_std().iter().all(|s| *s == 0.0));
        assert_eq!(p.mean_probs, m.mean_predict(&clip).unwrap());
    }

    #[test]
    fn mc_predict_is_seeded() {
        let m = small();
        let clip = synthesize_clip(4, 3, "c").unwrap();
        assert_eq!(m.mc_predict(&clip, 5, 7).unwrap(), m.mc_predict(&clip, 5, 7).unwrap());
        assert!(m.mc_predict(&clip, 1, 7).is_err());
    }

    #[test]
    fn elbo_gradient_matches_finite_differences() {
        let m = small();
        let clips: Vec<_> = (0..3)
            .map(|c| (synthesize_clip(c, 11 + c as u64, "c").unwrap(), c))
            .collect();
        let feats: Vec<Tensor> = clips.iter().map(|(c, _)| m.frontend.features(c).unwrap()).collect();
        let batch: Vec<(&Tensor, usize)> = feats.iter().zip(&clips).map(|(f, (_, l))| (f, *l)).collect();
        let kl_w = 0.01;
        let (_, grad) = m.elbo_loss(&batch, 42, kl_w).unwrap();
        let base = m.params_flat();
        let mut rng = seed::rng(3);
        let nt = m.trunk.param_count();
        let nv = m.variational.param_count();
        let mut idx: Vec<usize> = (0..20).map(|_| rng.gen_range(0..base.len())).collect();
        idx.push(nt + 1);
        idx.push(nt + nv / 2 + 2);
        for i in idx {
            let h = 1e-5;
            let mut plus = m.clone();
            let mut p = base.clone();
            p[i] += h;
            plus.set_params_flat(&p).unwrap();
            let mut minus = m.clone();
            p[i] -= 2.0 * h;
            minus.set_params_flat(&p).unwrap();
            let fd = (plus.elbo_loss(&batch, 42, kl_w).unwrap().0 - minus.elbo_loss(&batch, 42, kl_w).unwrap().0)
                / (2.0 * h);
            let denom = fd.abs().max(grad[i].abs()).max(1e-6);
            assert!((fd - grad[i]).abs() / denom < 1e-3, "param {i}: fd {fd} vs {}", grad[i]);
        }
    }
}
