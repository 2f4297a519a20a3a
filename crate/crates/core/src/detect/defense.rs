use serde::{Deserialize, Serialize};

use super::detector::{detect, score_prediction, CalibrationReference};
use super::td::td_detector;
use crate::attack::BlackBox;
use crate::bayes::BnnClassifier;
use crate::dataset::NUM_CLASSES;
use crate::dsp::{downsample_defense, local_smooth, AudioClip, SmoothKind};
use crate::Result;

/// Input preprocessing applied in front of a model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Defense {
    #[default]
    None,
    LocalSmoothing {
        window: usize,
        smoothing: SmoothKind,
    },
    Downsampling,
}

impl Defense {
    pub fn apply(&self, clip: &AudioClip) -> Result<AudioClip> {
        match *self {
            Defense::None => Ok(clip.clone()),
            Defense::LocalSmoothing { window, smoothing } => local_smooth(clip, window, smoothing),
            Defense::Downsampling => downsample_defense(clip),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Defense::None => "none",
            Defense::LocalSmoothing { .. } => "ls",
            Defense::Downsampling => "ds",
        }
    }
}

/// A model whose forward pass runs the defense first.
pub struct Defended<M> {
    pub inner: M,
    pub defense: Defense,
}

pub fn defense_wrap<M: BlackBox>(model: M, defense: Defense) -> Defended<M> {
    Defended { inner: model, defense }
}

impl<M: BlackBox> BlackBox for Defended<M> {
    fn posterior(&self, clip: &AudioClip) -> Result<Vec<f64>> {
        self.inner.posterior(&self.defense.apply(clip)?)
    }
}

/// Posterior of a BNN averaged over the detector's MC passes.
pub struct BnnOracle<'a> {
    pub model: &'a BnnClassifier,
    pub passes: usize,
    pub seed: u64,
}

impl BlackBox for BnnOracle<'_> {
    fn posterior(&self, clip: &AudioClip) -> Result<Vec<f64>> {
        Ok(self.model.mc_predict(clip, self.passes, self.seed)?.mean_probs)
    }
}

/// BNN classifier behind its dispersion detector: inputs the detector flags
/// get a uniform posterior, everything else the MC-averaged prediction.
pub struct GuardedBnn<'a> {
    pub model: &'a BnnClassifier,
    pub reference: &'a CalibrationReference,
}

impl GuardedBnn<'_> {
    /// Whether the detector flags `clip`.
    pub fn flags(&self, clip: &AudioClip) -> Result<bool> {
        Ok(detect(self.model, self.reference, clip)?.adversarial)
    }
}

impl BlackBox for GuardedBnn<'_> {
    fn posterior(&self, clip: &AudioClip) -> Result<Vec<f64>> {
        let cfg = &self.reference.config;
        let prediction = self.model.mc_predict(clip, cfg.passes, cfg.seed)?;
        let (_, distance) = score_prediction(self.reference, &prediction)?;
        if distance > self.reference.threshold {
            return Ok(vec![1.0 / NUM_CLASSES as f64; NUM_CLASSES]);
        }
        Ok(prediction.mean_probs)
    }
}

/// Classifier behind the TD detector: flagged inputs get a uniform posterior.
pub struct GuardedTd<M> {
    pub model: M,
    pub segments: usize,
    pub threshold: f64,
}

impl<M: BlackBox> GuardedTd<M> {
    pub fn score(&self, clip: &AudioClip) -> Result<f64> {
        td_detector(&self.model, clip, self.segments)
    }

    pub fn flags(&self, clip: &AudioClip) -> Result<bool> {
        Ok(self.score(clip)? > self.threshold)
    }
}

impl<M: BlackBox> BlackBox for GuardedTd<M> {
    fn posterior(&self, clip: &AudioClip) -> Result<Vec<f64>> {
        if self.flags(clip)? {
            return Ok(vec![1.0 / NUM_CLASSES as f64; NUM_CLASSES]);
        }
        self.model.posterior(clip)
    }
}
