use rand_distr::{Distribution, StandardNormal};

use crate::dsp::{scale_noise_to_snr, AudioClip};
use crate::seed;
use crate::Result;

/// Adds white Gaussian noise at the requested SNR. Makes no model queries.
pub fn gaussian_baseline(clip: &AudioClip, snr_db: f64, seed_value: u64) -> Result<AudioClip> {
    let mut rng = seed::rng(seed_value);
    let noise: Vec<f64> = (0..clip.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let scaled = scale_noise_to_snr(clip, &noise, snr_db)?;
    let samples = clip.samples().iter().zip(&scaled).map(|(s, n)| s + n).collect();
    clip.with_samples(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::snr_db;

    #[test]
    fn hits_requested_snr() {
        let s: Vec<f64> = (0..16000).map(|i| 0.3 * (i as f64 * 0.05).sin()).collect();
        let clip = AudioClip::new(s, 16000, "s").unwrap();
        let noisy = gaussian_baseline(&clip, 10.0, 3).unwrap();
        let noise: Vec<f64> = noisy.samples().iter().zip(clip.samples()).map(|(a, b)| a - b).collect();
        assert!((snr_db(clip.samples(), &noise) - 10.0).abs() < 1e-9);
        assert_eq!(noisy.samples(), gaussian_baseline(&clip, 10.0, 3).unwrap().samples());
    }
}
