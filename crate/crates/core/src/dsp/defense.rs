//! Input-transformation defenses: local smoothing and band-limiting.

use std::f64::consts::PI;

use super::{AudioClip, SAMPLE_RATE};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothKind {
    #[default]
    Median,
    Mean,
}

/// Replaces each sample by the median (or mean) of a centered window.
///
/// Near the edges the window shrinks symmetrically so it stays centered.
pub fn local_smooth(clip: &AudioClip, window: usize, kind: SmoothKind) -> Result<AudioClip> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("window {window} must be odd and >= 1")));
    }
    if window > clip.len() {
        return Err(Error::InvalidArgument(format!(
            "window {window} exceeds clip length {}",
            clip.len()
        )));
    }
    let x = clip.samples();
    let n = x.len();
    let half = window / 2;
    let mut buf = Vec::with_capacity(window);
    let out = (0..n)
        .map(|i| {
            let h = half.min(i).min(n - 1 - i);
            let span = &x[i - h..=i + h];
            match kind {
                SmoothKind::Mean => span.iter().sum::<f64>() / span.len() as f64,
                SmoothKind::Median => {
                    buf.clear();
                    buf.extend_from_slice(span);
                    let mid = buf.len() / 2;
                    *buf.select_nth_unstable_by(mid, f64::total_cmp).1
                }
            }
        })
        .collect();
    clip.with_samples(out)
}

/// Number of taps of the anti-aliasing filter used by [`downsample_defense`].
pub const LOWPASS_TAPS: usize = 101;

/// Blackman-windowed sinc low-pass, cutoff as a fraction of the sample rate,
/// normalized to unit DC gain.
pub fn lowpass_taps(cutoff: f64, taps: usize) -> Vec<f64> {
    let m = (taps - 1) as f64;
    let mut h: Vec<f64> = (0..taps)
        .map(|i| {
            let t = i as f64 - m / 2.0;
            let sinc = if t == 0.0 {
                2.0 * cutoff
            } else {
                (2.0 * PI * cutoff * t).sin() / (PI * t)
            };
            let w = 0.42 - 0.5 * (2.0 * PI * i as f64 / m).cos() + 0.08 * (4.0 * PI * i as f64 / m).cos();
            sinc * w
        })
        .collect();
    let sum: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= sum);
    h
}

/// 16 kHz → 8 kHz → 16 kHz band-limiting defense.
///
/// Low-pass at 4 kHz (edge samples replicated), keep every second sample,
/// then linearly interpolate back to the original length.
pub fn downsample_defense(clip: &AudioClip) -> Result<AudioClip> {
    if clip.sample_rate() != SAMPLE_RATE {
        return Err(Error::InvalidArgument(format!(
            "downsampling defense needs {SAMPLE_RATE} Hz input, got {}",
            clip.sample_rate()
        )));
    }
    let x = clip.samples();
    let n = x.len();
    let h = lowpass_taps(0.25, LOWPASS_TAPS);
    let half = (LOWPASS_TAPS / 2) as isize;
    let at = |i: isize| x[i.clamp(0, n as isize - 1) as usize];
    let decimated: Vec<f64> = (0..n)
        .step_by(2)
        .map(|i| {
            h.iter()
                .enumerate()
                .map(|(k, w)| w * at(i as isize + half - k as isize))
                .sum()
        })
        .collect();
    let out = (0..n)
        .map(|i| {
            let j = i / 2;
            if i % 2 == 0 {
                decimated[j]
            } else if j + 1 < decimated.len() {
                0.5 * (decimated[j] + decimated[j + 1])
            } else {
                decimated[j]
            }
        })
        .collect();
    clip.with_samples(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::mean_power;
    use proptest::prelude::*;

    fn clip(s: Vec<f64>) -> AudioClip {
        AudioClip::new(s, 16000, "t").unwrap()
    }

    #[test]
    fn smoothing_cases() {
        let c = clip(vec![0.3; 9]);
        assert_eq!(local_smooth(&c, 5, SmoothKind::Median).unwrap().samples(), c.samples());
        let imp = clip(vec![0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(local_smooth(&imp, 3, SmoothKind::Median).unwrap().samples(), &[0.0; 5]);
        let mean = local_smooth(&imp, 3, SmoothKind::Mean).unwrap();
        assert!((mean.samples()[1] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(mean.samples()[0], 0.0);
        assert!(local_smooth(&imp, 2, SmoothKind::Median).is_err());
        assert!(local_smooth(&imp, 7, SmoothKind::Median).is_err());
        assert!(local_smooth(&imp, 0, SmoothKind::Median).is_err());
    }

    proptest! {
        #[test]
        fn smoothing_identity_and_range(s in prop::collection::vec(-1.0f64..1.0, 1..64), w in 0usize..4) {
            let c = clip(s);
            let same = local_smooth(&c, 1, SmoothKind::Median).unwrap();
            prop_assert_eq!(same.samples(), c.samples());
            let window = (2 * w + 1).min(if c.len() % 2 == 1 { c.len() } else { c.len() - 1 });
            let out = local_smooth(&c, window, SmoothKind::Median).unwrap();
            let lo = c.samples().iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = c.samples().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(out.samples().iter().all(|v| *v >= lo && *v <= hi));
        }
    }

    #[test]
    fn downsample_keeps_length_and_dc() {
        let c = clip(vec![0.4; 16000]);
        let out = downsample_defense(&c).unwrap();
        assert_eq!(out.len(), 16000);
        assert!(out.samples().iter().all(|v| (v - 0.4).abs() < 1e-6));
    }

    #[test]
    fn seven_khz_is_suppressed() {
        let h = lowpass_taps(0.25, LOWPASS_TAPS);
        // |H| at 7 kHz evaluated directly from the taps
        let w = 2.0 * PI * 7000.0 / 16000.0;
        let (re, im) = h.iter().enumerate().fold((0.0, 0.0), |(r, i), (k, v)| {
            (r + v * (w * k as f64).cos(), i - v * (w * k as f64).sin())
        });
        let gain = (re * re + im * im).sqrt();
        assert!(gain < 0.05, "filter gain at 7 kHz = {gain}");

        let tone = clip((0..16000).map(|i| 0.5 * (w * i as f64).sin()).collect());
        let out = downsample_defense(&tone).unwrap();
        let ratio = (mean_power(out.samples()) / mean_power(tone.samples())).sqrt();
        assert!(ratio < 0.05, "rms ratio {ratio}");
    }

    #[test]
    fn downsample_rejects_other_rates() {
        let c = AudioClip::new(vec![0.0; 800], 8000, "r").unwrap();
        assert!(downsample_defense(&c).is_err());
    }
}
