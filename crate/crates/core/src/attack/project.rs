use crate::dsp::AudioClip;
use crate::Result;

/// Clamps `candidate` into the ℓ∞ ball of radius `delta_max` around
/// `original`, intersected with the valid amplitude range `[-1, 1]`.
pub fn project_linf(original: &AudioClip, candidate: &[f64], delta_max: f64) -> Result<AudioClip> {
    if candidate.len() != original.len() {
        return Err(crate::Error::Shape(format!(
            "candidate length {} vs original {}",
            candidate.len(),
            original.len()
        )));
    }
    let out = original
        .samples()
        .iter()
        .zip(candidate)
        .map(|(&o, &c)| {
            let lo = (o - delta_max).max(-1.0);
            let hi = (o + delta_max).min(1.0);
            if c.is_nan() {
                o
            } else {
                c.clamp(lo, hi)
            }
        })
        .collect();
    original.with_samples(out)
}
