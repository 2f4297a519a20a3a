use crate::{Error, Result};

/// Mono waveform with sample-rate metadata.
///
/// Samples are always finite and within `[-1, 1]`; every constructor enforces
/// this, so downstream code never re-checks.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
    id: String,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32, id: impl Into<String>) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidClip("sample_rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::InvalidClip("empty clip".into()));
        }
        if let Some((i, s)) = samples
            .iter()
            .enumerate()
            .find(|(_, s)| !s.is_finite() || s.abs() > 1.0)
        {
            return Err(Error::InvalidClip(format!("sample {i} = {s} outside [-1, 1]")));
        }
        Ok(Self {
            samples,
            sample_rate,
            id: id.into(),
        })
    }

    /// Builds a clip, clamping finite samples into `[-1, 1]`.
    pub fn clamped(mut samples: Vec<f64>, sample_rate: u32, id: impl Into<String>) -> Result<Self> {
        for s in samples.iter_mut() {
            if s.is_finite() {
                *s = s.clamp(-1.0, 1.0);
            }
        }
        Self::new(samples, sample_rate, id)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Same rate and id, new samples (clamped into range).
    pub fn with_samples(&self, samples: Vec<f64>) -> Result<Self> {
        Self::clamped(samples, self.sample_rate, self.id.clone())
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// Largest absolute per-sample difference to `other`.
    pub fn linf_distance(&self, other: &AudioClip) -> f64 {
        self.samples
            .iter()
            .zip(&other.samples)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_invalid_clips() {
        assert!(AudioClip::new(vec![], 16000, "e").is_err());
        assert!(AudioClip::new(vec![0.0], 0, "r").is_err());
        assert!(AudioClip::new(vec![1.5], 16000, "big").is_err());
        assert!(AudioClip::new(vec![f64::NAN], 16000, "nan").is_err());
    }

    #[test]
    fn clamped_saturates() {
        let c = AudioClip::clamped(vec![2.0, -3.0, 0.25], 8000, "c").unwrap();
        assert_eq!(c.samples(), &[1.0, -1.0, 0.25]);
        assert_eq!(c.peak(), 1.0);
    }
}
