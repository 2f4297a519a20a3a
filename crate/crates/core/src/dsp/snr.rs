use super::AudioClip;
use crate::{Error, Result};

/// Mean squared amplitude.
pub fn mean_power(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// `10·log10(P_signal / P_noise)`.
pub fn snr_db(signal: &[f64], noise: &[f64]) -> f64 {
    10.0 * (mean_power(signal) / mean_power(noise)).log10()
}

/// Rescales `noise` so that the signal-to-noise ratio equals `snr_db`.
pub fn scale_noise_to_snr(signal: &AudioClip, noise: &[f64], snr_db: f64) -> Result<Vec<f64>> {
    if noise.len() != signal.len() {
        return Err(Error::Shape(format!(
            "noise length {} vs signal length {}",
            noise.len(),
            signal.len()
        )));
    }
    let ps = mean_power(signal.samples());
    let pn = mean_power(noise);
    if ps == 0.0 {
        return Err(Error::ZeroPower("signal"));
    }
    if pn == 0.0 {
        return Err(Error::ZeroPower("noise"));
    }
    let target = ps / 10f64.powf(snr_db / 10.0);
    let gain = (target / pn).sqrt();
    Ok(noise.iter().map(|v| v * gain).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ten_db_gives_tenth_power() {
        // P_signal = 0.1 via constant amplitude sqrt(0.1)
        let clip = AudioClip::new(vec![0.1f64.sqrt(); 1000], 16000, "s").unwrap();
        let noise: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -0.5 }).collect();
        let scaled = scale_noise_to_snr(&clip, &noise, 10.0).unwrap();
        assert!((mean_power(&scaled) - 0.01).abs() < 1e-12);
        let scaled = scale_noise_to_snr(&clip, &noise, 0.0).unwrap();
        assert!((mean_power(&scaled) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn zero_power_errors() {
        let silent = AudioClip::new(vec![0.0; 4], 16000, "z").unwrap();
        assert!(matches!(
            scale_noise_to_snr(&silent, &[1.0; 4], 10.0),
            Err(Error::ZeroPower("signal"))
        ));
        let clip = AudioClip::new(vec![0.5; 4], 16000, "c").unwrap();
        assert!(matches!(
            scale_noise_to_snr(&clip, &[0.0; 4], 10.0),
            Err(Error::ZeroPower("noise"))
        ));
        assert!(scale_noise_to_snr(&clip, &[1.0; 3], 10.0).is_err());
    }

    proptest! {
        #[test]
        fn achieved_snr_matches_request(
            sig in prop::collection::vec(-1.0f64..1.0, 64),
            noise in prop::collection::vec(-3.0f64..3.0, 64),
            db in -20.0f64..60.0,
        ) {
            prop_assume!(mean_power(&sig) > 1e-6 && mean_power(&noise) > 1e-6);
            let clip = AudioClip::new(sig, 16000, "p").unwrap();
            let scaled = scale_noise_to_snr(&clip, &noise, db).unwrap();
            let want = mean_power(clip.samples()) / 10f64.powf(db / 10.0);
            prop_assert!((mean_power(&scaled) - want).abs() <= 1e-12 * want);
        }
    }
}
