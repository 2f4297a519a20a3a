//! FFT plans for framed spectral analysis.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Complex value as `(re, im)`.
pub type Complex = (f64, f64);

/// Forward complex FFT of a fixed size (no normalization).
#[derive(Clone)]
pub struct Fft {
    n: usize,
    plan: Arc<dyn rustfft::Fft<f64>>,
}

impl std::fmt::Debug for Fft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft").field("n", &self.n).finish()
    }
}

impl Fft {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "fft size must be positive");
        Self {
            n,
            plan: FftPlanner::new().plan_fft_forward(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn process_complex(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.n);
        self.plan.process(buf);
    }

    /// In-place transform on `(re, im)` pairs.
    pub fn process(&self, buf: &mut [Complex]) {
        let mut tmp: Vec<Complex64> = buf.iter().map(|&(r, i)| Complex64::new(r, i)).collect();
        self.process_complex(&mut tmp);
        for (b, t) in buf.iter_mut().zip(tmp) {
            *b = (t.re, t.im);
        }
    }
}

/// Power spectrum `|X_k|^2` of a real frame, `k = 0..=n/2`.
///
/// Packs the real input into a half-length complex transform.
#[derive(Debug, Clone)]
pub struct RealPowerSpectrum {
    n: usize,
    half: Fft,
    post: Vec<Complex>,
}

impl RealPowerSpectrum {
    pub fn new(n: usize) -> Self {
        assert!(n.is_power_of_two() && n >= 2, "fft size {n} invalid");
        let post = (0..n / 2)
            .map(|k| {
                let a = -2.0 * PI * k as f64 / n as f64;
                (a.cos(), a.sin())
            })
            .collect();
        Self {
            n,
            half: Fft::new(n / 2),
            post,
        }
    }

    pub fn n_fft(&self) -> usize {
        self.n
    }

    pub fn n_bins(&self) -> usize {
        self.n / 2 + 1
    }

    /// `frame` is zero-padded to the plan size; `scratch` must hold n/2 values.
    pub fn compute(&self, frame: &[f64], scratch: &mut Vec<Complex64>, out: &mut [f64]) {
        let m = self.n / 2;
        debug_assert!(frame.len() <= self.n);
        debug_assert_eq!(out.len(), m + 1);
        scratch.clear();
        let mut pairs = frame.chunks_exact(2);
        scratch.extend((&mut pairs).map(|p| Complex64::new(p[0], p[1])));
        if let [last] = pairs.remainder() {
            scratch.push(Complex64::new(*last, 0.0));
        }
        scratch.resize(m, Complex64::new(0.0, 0.0));
        self.half.process_complex(scratch);
        let z0 = scratch[0];
        out[0] = (z0.re + z0.im) * (z0.re + z0.im);
        out[m] = (z0.re - z0.im) * (z0.re - z0.im);
        for k in 1..m {
            let (zr, zi) = (scratch[k].re, scratch[k].im);
            let (cr, ci) = (scratch[m - k].re, -scratch[m - k].im);
            // even = (Z_k + conj Z_{m-k}) / 2, odd = (Z_k - conj Z_{m-k}) / 2i
            let er = 0.5 * (zr + cr);
            let ei = 0.5 * (zi + ci);
            let dr = 0.5 * (zr - cr);
            let di = 0.5 * (zi - ci);
            let (or, oi) = (di, -dr);
            let (wr, wi) = self.post[k];
            let xr = er + wr * or - wi * oi;
            let xi = ei + wr * oi + wi * or;
            out[k] = xr * xr + xi * xi;
        }
    }
}
