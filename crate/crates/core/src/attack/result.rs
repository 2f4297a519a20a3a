use serde::{Deserialize, Serialize};

use crate::dsp::{snr_db, AudioClip};

#[derive(Debug, Clone)]
pub struct AdversarialResult {
    pub clip: AudioClip,
    pub queries_used: usize,
    pub success: bool,
    pub final_loss: f64,
    /// MFCC cosine similarity to the original.
    pub similarity: f64,
    /// `None` when the perturbation is identically zero.
    pub snr_db: Option<f64>,
    /// Best objective so far after each iteration (lower is better).
    pub loss_trace: Vec<f64>,
}

/// Serializable summary without the waveform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSummary {
    pub queries_used: usize,
    pub success: bool,
    pub final_loss: f64,
    pub similarity: f64,
    pub snr_db: Option<f64>,
    pub linf: f64,
}

impl AdversarialResult {
    pub(crate) fn perturbation_snr(original: &AudioClip, adv: &AudioClip) -> Option<f64> {
        let noise: Vec<f64> = adv
            .samples()
            .iter()
            .zip(original.samples())
            .map(|(a, o)| a - o)
            .collect();
        if noise.iter().all(|v| *v == 0.0) {
            None
        } else {
            Some(snr_db(original.samples(), &noise))
        }
    }

    pub fn summary(&self, original: &AudioClip) -> ResultSummary {
        ResultSummary {
            queries_used: self.queries_used,
            success: self.success,
            final_loss: self.final_loss,
            similarity: self.similarity,
            snr_db: self.snr_db,
            linf: self.clip.linf_distance(original),
        }
    }
}
