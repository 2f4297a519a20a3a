use std::path::Path;

use serde::{Deserialize, Serialize};

use super::wasserstein::{sliced_wasserstein, wasserstein_1d, EmpiricalDist, SLICES};
use crate::bayes::{column_std, BnnClassifier, McPrediction};
use crate::dsp::AudioClip;
use crate::harness::metrics::youden_threshold;
use crate::nn::checkpoint::{Reader, Writer};
use crate::{Error, Result};

/// Per-clip dispersion statistic computed from Monte-Carlo passes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    /// Mean over hidden units of the per-unit std across passes.
    HiddenStd,
    /// Mean over classes of the per-class posterior std across passes.
    OutputStd,
    /// Entropy of the MC-averaged posterior.
    OutputEntropy,
    /// The full per-pass hidden vectors, compared by sliced distance.
    HiddenSliced,
}

impl Statistic {
    fn code(self) -> u8 {
        match self {
            Statistic::HiddenStd => 0,
            Statistic::OutputStd => 1,
            Statistic::OutputEntropy => 2,
            Statistic::HiddenSliced => 3,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        Ok(match c {
            0 => Statistic::HiddenStd,
            1 => Statistic::OutputStd,
            2 => Statistic::OutputEntropy,
            3 => Statistic::HiddenSliced,
            _ => return Err(Error::Checkpoint(format!("unknown statistic code {c}"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Statistic::HiddenStd => "hidden-std",
            Statistic::OutputStd => "output-std",
            Statistic::OutputEntropy => "output-entropy",
            Statistic::HiddenSliced => "hidden-sliced",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub statistic: Statistic,
    /// MC passes per clip.
    pub passes: usize,
    /// Pass seeds are shared by every clip so scores differ only through the input.
    pub seed: u64,
    pub slices: usize,
    pub translation_invariant: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            statistic: Statistic::OutputStd,
            passes: 32,
            seed: 29,
            slices: SLICES,
            translation_invariant: true,
        }
    }
}

/// Statistic value plus the raw MC record it came from.
#[derive(Debug, Clone)]
pub struct StatisticSample {
    pub value: f64,
    pub prediction: McPrediction,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

pub fn bnn_statistic(
    model: &BnnClassifier,
    clip: &AudioClip,
    passes: usize,
    seed_value: u64,
    statistic: Statistic,
) -> Result<StatisticSample> {
    let prediction = model.mc_predict(clip, passes, seed_value)?;
    let value = statistic_value(&prediction, statistic);
    Ok(StatisticSample { value, prediction })
}

pub(crate) fn statistic_value(p: &McPrediction, statistic: Statistic) -> f64 {
    match statistic {
        Statistic::HiddenStd | Statistic::HiddenSliced => mean(&p.hidden_std()),
        Statistic::OutputStd => mean(&column_std(&p.probs)),
        Statistic::OutputEntropy => -p
            .mean_probs
            .iter()
            .filter(|&&q| q > 0.0)
            .map(|q| q * q.ln())
            .sum::<f64>(),
    }
}

fn centre(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let h = rows[0].len();
    let n = rows.len() as f64;
    let m: Vec<f64> = (0..h).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    rows.iter()
        .map(|r| r.iter().zip(&m).map(|(x, c)| x - c).collect())
        .collect()
}

/// Clean-data reference for the dispersion detector.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReference {
    pub config: DetectorConfig,
    /// One statistic value per clean reference clip.
    pub reference: EmpiricalDist,
    /// Pooled hidden samples (sliced mode only), centred per clip when the
    /// distance is translation-invariant.
    pub reference_vectors: Vec<Vec<f64>>,
    pub threshold: f64,
    pub config_hash: String,
}

/// Per-clip detector output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionScore {
    pub clip_id: String,
    pub statistic: f64,
    pub distance: f64,
    pub adversarial: bool,
}

/// Statistic value and reference distance of an already computed MC record.
pub fn score_prediction(reference: &CalibrationReference, prediction: &McPrediction) -> Result<(f64, f64)> {
    let cfg = &reference.config;
    let value = statistic_value(prediction, cfg.statistic);
    let d = match cfg.statistic {
        Statistic::HiddenSliced => sliced_wasserstein(
            &prediction.hidden,
            &reference.reference_vectors,
            cfg.slices,
            cfg.seed,
            cfg.translation_invariant,
        )?,
        _ => wasserstein_1d(&EmpiricalDist::point(value)?, &reference.reference),
    };
    Ok((value, d))
}

fn distance_for(model: &BnnClassifier, reference: &CalibrationReference, clip: &AudioClip) -> Result<(f64, f64)> {
    let cfg = &reference.config;
    score_prediction(reference, &model.mc_predict(clip, cfg.passes, cfg.seed)?)
}

/// Builds the clean reference from `clean` and picks the Youden threshold
/// on a labelled pool (`true` = adversarial).
pub fn calibrate(
    model: &BnnClassifier,
    clean: &[AudioClip],
    pool: &[(AudioClip, bool)],
    config: &DetectorConfig,
    config_hash: &str,
) -> Result<CalibrationReference> {
    if clean.is_empty() {
        return Err(Error::InvalidArgument("calibration split is empty".into()));
    }
    let mut values = Vec::with_capacity(clean.len());
    let mut vectors = Vec::new();
    for clip in clean {
        let s = bnn_statistic(model, clip, config.passes, config.seed, config.statistic)?;
        values.push(s.value);
        if config.statistic == Statistic::HiddenSliced {
            if config.translation_invariant {
                vectors.extend(centre(&s.prediction.hidden));
            } else {
                vectors.extend(s.prediction.hidden);
            }
        }
    }
    let mut reference = CalibrationReference {
        config: config.clone(),
        reference: EmpiricalDist::new(values)?,
        reference_vectors: vectors,
        threshold: 0.0,
        config_hash: config_hash.to_string(),
    };
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (clip, adv) in pool {
        let (_, d) = distance_for(model, &reference, clip)?;
        if *adv {
            pos.push(d);
        } else {
            neg.push(d);
        }
    }
    reference.threshold = youden_threshold(&pos, &neg);
    Ok(reference)
}

/// Scores one clip against the reference; adversarial iff distance > threshold.
pub fn detect(model: &BnnClassifier, reference: &CalibrationReference, clip: &AudioClip) -> Result<DetectionScore> {
    let (statistic, distance) = distance_for(model, reference, clip)?;
    Ok(DetectionScore {
        clip_id: clip.id().to_string(),
        statistic,
        distance,
        adversarial: distance > reference.threshold,
    })
}

const REF_MAGIC: &[u8; 8] = b"BBAUDREF";
const REF_VERSION: u32 = 1;

impl CalibrationReference {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.bytes(REF_MAGIC);
        w.u32(REF_VERSION);
        w.u8(self.config.statistic.code());
        w.u32(self.config.passes as u32);
        w.u64(self.config.seed);
        w.u32(self.config.slices as u32);
        w.u8(u8::from(self.config.translation_invariant));
        w.f64(self.threshold);
        w.u32(self.config_hash.len() as u32);
        w.bytes(self.config_hash.as_bytes());
        w.f64s(self.reference.sorted());
        let dim = self.reference_vectors.first().map_or(0, Vec::len);
        w.u32(dim as u32);
        let flat: Vec<f64> = self.reference_vectors.iter().flatten().copied().collect();
        w.f64s(&flat);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.bytes(8)? != REF_MAGIC {
            return Err(Error::Checkpoint("bad reference magic".into()));
        }
        let version = r.u32()?;
        if version != REF_VERSION {
            return Err(Error::Checkpoint(format!("unsupported reference version {version}")));
        }
        let statistic = Statistic::from_code(r.u8()?)?;
        let passes = r.u32()? as usize;
        let seed = r.u64()?;
        let slices = r.u32()? as usize;
        let translation_invariant = r.u8()? != 0;
        let threshold = r.f64()?;
        let hash_len = r.u32()? as usize;
        let config_hash = String::from_utf8(r.bytes(hash_len)?.to_vec())
            .map_err(|_| Error::Checkpoint("config hash is not UTF-8".into()))?;
        let reference = EmpiricalDist::new(r.f64s()?).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let dim = r.u32()? as usize;
        let flat = r.f64s()?;
        r.finish()?;
        if !threshold.is_finite() || (dim == 0 && !flat.is_empty()) || (dim > 0 && flat.len() % dim != 0) {
            return Err(Error::Checkpoint("inconsistent reference section".into()));
        }
        let reference_vectors = if dim == 0 {
            Vec::new()
        } else {
            flat.chunks_exact(dim).map(<[f64]>::to_vec).collect()
        };
        Ok(Self {
            config: DetectorConfig {
                statistic,
                passes,
                seed,
                slices,
                translation_invariant,
            },
            reference,
            reference_vectors,
            threshold,
            config_hash,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

/// CSV with columns `clip_id,statistic,distance,decision,adversarial`.
pub fn write_detection_csv(path: impl AsRef<Path>, rows: &[(DetectionScore, bool)]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("clip_id,statistic,distance,decision,adversarial\n");
    for (s, truth) in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            s.clip_id,
            s.statistic,
            s.distance,
            if s.adversarial { "adversarial" } else { "clean" },
            u8::from(*truth)
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// CSV with columns `clip_id,group,hidden_std` for distribution plots.
pub fn write_hidden_std_csv(path: impl AsRef<Path>, rows: &[(String, String, f64)]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("clip_id,group,hidden_std\n");
    for (id, group, v) in rows {
        out.push_str(&format!("{id},{group},{v}\n"));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
