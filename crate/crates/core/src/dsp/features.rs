//! Framed spectral features: mel filterbank energies, log-mel and MFCC.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use super::fft::RealPowerSpectrum;
use super::AudioClip;
use crate::{Error, Result};

/// Floor applied to mel energies before taking the log.
pub const LOG_FLOOR: f64 = 1e-10;

pub const DEFAULT_MFCC_MELS: usize = 26;
pub const DEFAULT_MFCC_COEFFS: usize = 13;

/// Analysis frame geometry in samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameConfig {
    pub frame_len: usize,
    pub hop: usize,
    pub n_fft: usize,
}

impl FrameConfig {
    /// 25 ms frames with a 10 ms hop at the given rate.
    pub fn for_rate(sample_rate: u32) -> Self {
        let frame_len = (sample_rate as usize * 25 / 1000).max(1);
        let hop = (sample_rate as usize / 100).max(1);
        Self {
            frame_len,
            hop,
            n_fft: frame_len.next_power_of_two(),
        }
    }

    pub fn num_frames(&self, len: usize) -> usize {
        if len < self.frame_len {
            0
        } else {
            (len - self.frame_len) / self.hop + 1
        }
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters equally spaced on the mel scale from 0 Hz to Nyquist.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    n_mels: usize,
    n_bins: usize,
    // (first bin, weights) per band
    filters: Vec<(usize, Vec<f64>)>,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, n_fft: usize, sample_rate: u32) -> Self {
        let n_bins = n_fft / 2 + 1;
        let nyquist = sample_rate as f64 / 2.0;
        let top = hz_to_mel(nyquist);
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
            .collect();
        let bin_hz = sample_rate as f64 / n_fft as f64;
        let filters = (0..n_mels)
            .map(|m| {
                let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
                let weights: Vec<(usize, f64)> = (0..n_bins)
                    .filter_map(|k| {
                        let f = k as f64 * bin_hz;
                        let w = ((f - lo) / (center - lo)).min((hi - f) / (hi - center));
                        (w > 0.0).then_some((k, w))
                    })
                    .collect();
                match weights.first() {
                    Some(&(start, _)) => (start, weights.iter().map(|&(_, w)| w).collect()),
                    None => (0, Vec::new()),
                }
            })
            .collect();
        Self {
            n_mels,
            n_bins,
            filters,
        }
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn apply(&self, power: &[f64], out: &mut [f64]) {
        debug_assert_eq!(power.len(), self.n_bins);
        for ((start, w), o) in self.filters.iter().zip(out.iter_mut()) {
            *o = w.iter().zip(&power[*start..]).map(|(a, b)| a * b).sum();
        }
    }
}

/// Reusable frame → mel-energy pipeline (Hann window, power spectrum, filterbank).
#[derive(Debug, Clone)]
pub struct MelExtractor {
    frame: FrameConfig,
    window: Vec<f64>,
    spectrum: RealPowerSpectrum,
    filterbank: MelFilterbank,
}

impl MelExtractor {
    pub fn new(sample_rate: u32, n_mels: usize) -> Self {
        let frame = FrameConfig::for_rate(sample_rate);
        let n = frame.frame_len;
        let window = (0..n)
            .map(|i| {
                if n == 1 {
                    1.0
                } else {
                    0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos()
                }
            })
            .collect();
        Self {
            frame,
            window,
            spectrum: RealPowerSpectrum::new(frame.n_fft),
            filterbank: MelFilterbank::new(n_mels, frame.n_fft, sample_rate),
        }
    }

    pub fn frame(&self) -> FrameConfig {
        self.frame
    }

    pub fn n_mels(&self) -> usize {
        self.filterbank.n_mels()
    }

    /// Mel energies as a row-major `[num_frames × n_mels]` buffer.
    pub fn mel_energies(&self, samples: &[f64]) -> Result<(usize, Vec<f64>)> {
        let frames = self.frame.num_frames(samples.len());
        if frames == 0 {
            return Err(Error::ClipTooShort {
                len: samples.len(),
                needed: self.frame.frame_len,
            });
        }
        let n_mels = self.n_mels();
        let mut out = vec![0.0; frames * n_mels];
        let mut buf = vec![0.0; self.frame.frame_len];
        let mut power = vec![0.0; self.spectrum.n_bins()];
        let mut scratch: Vec<Complex64> = Vec::with_capacity(self.frame.n_fft / 2);
        for f in 0..frames {
            let src = &samples[f * self.frame.hop..f * self.frame.hop + self.frame.frame_len];
            if src.iter().all(|&s| s == 0.0) {
                continue;
            }
            for ((b, s), w) in buf.iter_mut().zip(src).zip(&self.window) {
                *b = s * w;
            }
            self.spectrum.compute(&buf, &mut scratch, &mut power);
            self.filterbank.apply(&power, &mut out[f * n_mels..(f + 1) * n_mels]);
        }
        Ok((frames, out))
    }

    /// Natural-log mel energies with the [`LOG_FLOOR`] applied.
    pub fn log_mel(&self, samples: &[f64]) -> Result<(usize, Vec<f64>)> {
        let (frames, mut e) = self.mel_energies(samples)?;
        for v in e.iter_mut() {
            *v = v.max(LOG_FLOOR).ln();
        }
        Ok((frames, e))
    }
}

/// Log-mel spectrogram of a clip as `[num_frames × n_mels]`.
pub fn log_mel(clip: &AudioClip, n_mels: usize) -> Result<(usize, Vec<f64>)> {
    MelExtractor::new(clip.sample_rate(), n_mels).log_mel(clip.samples())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MfccMatrix {
    data: Vec<f64>,
    num_frames: usize,
    num_coeffs: usize,
    pub frame_len: usize,
    pub frame_hop: usize,
}

impl MfccMatrix {
    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn num_coeffs(&self) -> usize {
        self.num_coeffs
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        &self.data[i * self.num_coeffs..(i + 1) * self.num_coeffs]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Per-coefficient mean over frames.
    pub fn mean_frame(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.num_coeffs];
        for f in 0..self.num_frames {
            for (a, b) in m.iter_mut().zip(self.frame(f)) {
                *a += b;
            }
        }
        m.iter_mut().for_each(|v| *v /= self.num_frames as f64);
        m
    }
}

/// Orthonormal DCT-II basis, `n_out` rows of length `n_in`.
fn dct_matrix(n_in: usize, n_out: usize) -> Vec<f64> {
    let n = n_in as f64;
    let mut m = Vec::with_capacity(n_in * n_out);
    for k in 0..n_out {
        let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
        for i in 0..n_in {
            m.push(scale * (PI * k as f64 * (2.0 * i as f64 + 1.0) / (2.0 * n)).cos());
        }
    }
    m
}

/// MFCC extractor holding a precomputed DCT basis.
#[derive(Debug, Clone)]
pub struct MfccExtractor {
    mel: MelExtractor,
    n_coeffs: usize,
    dct: Vec<f64>,
}

impl MfccExtractor {
    pub fn new(sample_rate: u32, n_mels: usize, n_coeffs: usize) -> Self {
        assert!(n_coeffs <= n_mels, "n_coeffs must not exceed n_mels");
        Self {
            mel: MelExtractor::new(sample_rate, n_mels),
            n_coeffs,
            dct: dct_matrix(n_mels, n_coeffs),
        }
    }

    pub fn compute(&self, samples: &[f64]) -> Result<MfccMatrix> {
        let (frames, logmel) = self.mel.log_mel(samples)?;
        let n_mels = self.mel.n_mels();
        let mut data = Vec::with_capacity(frames * self.n_coeffs);
        for row in logmel.chunks_exact(n_mels) {
            for basis in self.dct.chunks_exact(n_mels) {
                data.push(basis.iter().zip(row).map(|(a, b)| a * b).sum());
            }
        }
        let frame = self.mel.frame();
        Ok(MfccMatrix {
            data,
            num_frames: frames,
            num_coeffs: self.n_coeffs,
            frame_len: frame.frame_len,
            frame_hop: frame.hop,
        })
    }
}

pub fn mfcc(clip: &AudioClip, n_mels: usize, n_coeffs: usize) -> Result<MfccMatrix> {
    MfccExtractor::new(clip.sample_rate(), n_mels, n_coeffs).compute(clip.samples())
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("{} vs {}", a.len(), b.len())));
    }
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::DegenerateFeatures);
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Cosine similarity of flattened MFCC matrices (26 mels, 13 coefficients).
pub fn mfcc_cosine_similarity(a: &AudioClip, b: &AudioClip) -> Result<f64> {
    if a.len() != b.len() || a.sample_rate() != b.sample_rate() {
        return Err(Error::InvalidArgument(format!(
            "clips differ: {} samples @ {} Hz vs {} samples @ {} Hz",
            a.len(),
            a.sample_rate(),
            b.len(),
            b.sample_rate()
        )));
    }
    let ex = MfccExtractor::new(a.sample_rate(), DEFAULT_MFCC_MELS, DEFAULT_MFCC_COEFFS);
    let fa = ex.compute(a.samples())?;
    let fb = ex.compute(b.samples())?;
    cosine_similarity(fa.as_flat(), fb.as_flat())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, amp: f64) -> AudioClip {
        let s = (0..16000)
            .map(|i| amp * (2.0 * PI * freq * i as f64 / 16000.0).sin())
            .collect();
        AudioClip::new(s, 16000, "tone").unwrap()
    }

    #[test]
    fn frame_geometry() {
        let f = FrameConfig::for_rate(16000);
        assert_eq!((f.frame_len, f.hop, f.n_fft), (400, 160, 512));
        assert_eq!(f.num_frames(16000), 98);
        assert_eq!(f.num_frames(399), 0);
        assert_eq!(f.num_frames(400), 1);
    }

    #[test]
    fn silence_gives_constant_log_energy() {
        let clip = AudioClip::new(vec![0.0; 16000], 16000, "s").unwrap();
        let m = mfcc(&clip, 26, 13).unwrap();
        assert_eq!(m.num_frames(), 98);
        let expected_c0 = LOG_FLOOR.ln() * (26f64).sqrt();
        for f in 0..m.num_frames() {
            let row = m.frame(f);
            assert!((row[0] - expected_c0).abs() < 1e-9);
            assert!(row[1..].iter().all(|c| c.abs() < 1e-9));
        }
    }

    #[test]
    fn identical_clips_identical_mfcc() {
        let a = tone(440.0, 0.3);
        assert_eq!(mfcc(&a, 26, 13).unwrap(), mfcc(&a.clone(), 26, 13).unwrap());
    }

    #[test]
    fn tone_peaks_in_its_band() {
        // Analytic triangle weight of every band at 440 Hz picks the expected band.
        let top = 2595.0 * (1.0f64 + 8000.0 / 700.0).log10();
        let edge = |i: usize| 700.0 * (10f64.powf(top * i as f64 / 27.0 / 2595.0) - 1.0);
        let expected = (0..26)
            .map(|m| {
                let (lo, c, hi) = (edge(m), edge(m + 1), edge(m + 2));
                ((440.0 - lo) / (c - lo)).min((hi - 440.0) / (hi - c))
            })
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
            .0;
        let ex = MelExtractor::new(16000, 26);
        let (frames, e) = ex.mel_energies(tone(440.0, 0.5).samples()).unwrap();
        let mut mean = vec![0.0; 26];
        for row in e.chunks_exact(26) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v / frames as f64;
            }
        }
        let argmax = mean.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(argmax, expected);
    }

    #[test]
    fn too_short_clip_errors() {
        let clip = AudioClip::new(vec![0.1; 100], 16000, "short").unwrap();
        assert!(matches!(mfcc(&clip, 26, 13), Err(Error::ClipTooShort { .. })));
    }

    #[test]
    fn similarity_identity_and_orthogonality() {
        let a = tone(440.0, 0.3);
        assert!((mfcc_cosine_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-9);
        let b = tone(1200.0, 0.2);
        let ab = mfcc_cosine_similarity(&a, &b).unwrap();
        let ba = mfcc_cosine_similarity(&b, &a).unwrap();
        assert_eq!(ab, ba);

        let v: Vec<f64> = (0..20).map(|i| 1.0 + i as f64).collect();
        let left: Vec<f64> = v
            .iter()
            .enumerate()
            .map(|(i, x)| if i < 10 { *x } else { 0.0 })
            .collect();
        let right: Vec<f64> = v
            .iter()
            .enumerate()
            .map(|(i, x)| if i < 10 { 0.0 } else { *x })
            .collect();
        assert!(cosine_similarity(&left, &right).unwrap().abs() < 1e-9);
        assert!(matches!(
            cosine_similarity(&[0.0; 4], &[1.0; 4]),
            Err(Error::DegenerateFeatures)
        ));
    }

    #[test]
    fn similarity_requires_matching_clips() {
        let a = tone(440.0, 0.3);
        let b = AudioClip::new(vec![0.1; 8000], 16000, "b").unwrap();
        assert!(mfcc_cosine_similarity(&a, &b).is_err());
    }
}
