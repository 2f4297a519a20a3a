use crate::attack::BlackBox;
use crate::dsp::AudioClip;
use crate::{Error, Result};

/// Default number of TD segments.
pub const TD_SEGMENTS: usize = 4;

/// Total-variation distance `½ Σ |p − q|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Temporal-dependency score: mean total-variation distance between the
/// full-clip posterior and the posteriors of `k` uniform time segments, each
/// zero-padded to the full length.
pub fn td_detector(model: &dyn BlackBox, clip: &AudioClip, k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::InvalidArgument("TD needs at least 2 segments".into()));
    }
    let n = clip.len();
    if n < k {
        return Err(Error::ClipTooShort { len: n, needed: k });
    }
    let full = model.posterior(clip)?;
    let seg = n.div_ceil(k);
    let mut total = 0.0;
    for i in 0..k {
        let start = (i * seg).min(n);
        let end = ((i + 1) * seg).min(n);
        let mut samples = vec![0.0; n];
        samples[..end - start].copy_from_slice(&clip.samples()[start..end]);
        let part = clip.with_samples(samples)?.with_id(format!("{}#seg{i}", clip.id()));
        total += total_variation(&model.posterior(&part)?, &full);
    }
    Ok(total / k as f64)
}
