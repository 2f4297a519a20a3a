use rand::Rng;
use rand_distr::StandardNormal;

use super::loss::{attack_loss, is_success};
use super::{project_linf, AdversarialResult, AttackConfig, QueryOracle};
use crate::dsp::{mfcc_cosine_similarity, AudioClip};
use crate::nn::{Adam, AdamConfig};
use crate::{seed, Error, Result};

/// Piecewise-linear interpolation of `z` onto `n` evenly spaced points, with
/// the first and last latent values pinned to the endpoints.
pub fn upsample_linear(z: &[f64], n: usize) -> Vec<f64> {
    let d = z.len();
    if n == 0 {
        return Vec::new();
    }
    if d == 1 || n == 1 {
        return vec![z[0]; n];
    }
    let scale = (d - 1) as f64 / (n - 1) as f64;
    (0..n)
        .map(|i| {
            let t = i as f64 * scale;
            let j = (t.floor() as usize).min(d - 2);
            let w = t - j as f64;
            z[j] * (1.0 - w) + z[j + 1] * w
        })
        .collect()
}

fn unit_direction<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let u: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            return u.into_iter().map(|v| v / norm).collect();
        }
    }
}

/// Forward-difference random-direction gradient estimate
/// `(b/q) Σ_k (f(z + β u_k) − f(z)) / β · u_k` with `u_k` uniform on the unit
/// sphere. `f0` is `f(z)`.
pub fn estimate_gradient<R, F>(
    mut f: F,
    z: &[f64],
    f0: f64,
    directions: usize,
    smoothing: f64,
    scaling: f64,
    rng: &mut R,
) -> Result<Vec<f64>>
where
    R: Rng,
    F: FnMut(&[f64]) -> Result<f64>,
{
    let d = z.len();
    let mut g = vec![0.0; d];
    let mut probe = vec![0.0; d];
    for _ in 0..directions {
        let u = unit_direction(rng, d);
        for i in 0..d {
            probe[i] = z[i] + smoothing * u[i];
        }
        let coeff = scaling * (f(&probe)? - f0) / smoothing / directions as f64;
        for i in 0..d {
            g[i] += coeff * u[i];
        }
    }
    Ok(g)
}

struct Probe {
    clip: AudioClip,
    loss: f64,
}

/// Gradient-free attack in a low-dimensional latent space.
///
/// The perturbation is `delta_max · tanh(upsample(z))`; each iteration spends
/// `directions + 1` queries on a gradient estimate and takes one Adam step on
/// `z`.
pub fn zeroth_order_attack(
    oracle: &mut QueryOracle,
    original: &AudioClip,
    label: usize,
    config: &AttackConfig,
) -> Result<AdversarialResult> {
    config.validate()?;
    let params = &config.zeroth;
    let n = original.len();
    let mut rng = seed::rng(config.seed);
    let start = oracle.queries_used();
    let mut z = vec![0.0; params.latent_dim];
    let mut adam = Adam::new(
        AdamConfig {
            lr: params.step_size,
            ..AdamConfig::default()
        },
        params.latent_dim,
    );

    let decode = |z: &[f64]| -> Result<AudioClip> {
        let up = upsample_linear(z, n);
        let cand: Vec<f64> = original
            .samples()
            .iter()
            .zip(&up)
            .map(|(o, u)| o + config.delta_max * u.tanh())
            .collect();
        project_linf(original, &cand, config.delta_max)
    };

    let mut best: Option<Probe> = None;
    let mut trace = Vec::new();
    let mut found: Option<Probe> = None;

    loop {
        let mut eval = |z: &[f64]| -> Result<f64> {
            if found.is_some() {
                return Ok(0.0);
            }
            let clip = decode(z)?;
            let probs = oracle.query(&clip)?;
            let loss = attack_loss(&probs, label, config.mode);
            if is_success(loss) && found.is_none() {
                found = Some(Probe {
                    clip: clip.clone(),
                    loss,
                });
            }
            if best.as_ref().is_none_or(|b| loss < b.loss) {
                best = Some(Probe { clip, loss });
            }
            Ok(loss)
        };
        let step = (|| -> Result<Vec<f64>> {
            let f0 = eval(&z)?;
            if is_success(f0) {
                return Ok(Vec::new());
            }
            estimate_gradient(
                &mut eval,
                &z,
                f0,
                params.directions,
                params.smoothing,
                params.scaling,
                &mut rng,
            )
        })();
        match step {
            Ok(g) => {
                if let Some(b) = &best {
                    trace.push(b.loss);
                }
                if found.is_some() {
                    break;
                }
                adam.step(&mut z, &g);
            }
            Err(Error::BudgetExhausted { budget }) => {
                if let Some(b) = &best {
                    trace.push(b.loss);
                }
                if best.is_none() {
                    return Err(Error::BudgetExhausted { budget });
                }
                break;
            }
            Err(e) => return Err(e),
        }
    }

    let queries_used = oracle.queries_used() - start;
    let (probe, success) = match found {
        Some(p) => (p, true),
        None => (best.expect("at least one query evaluated"), false),
    };
    Ok(AdversarialResult {
        similarity: mfcc_cosine_similarity(original, &probe.clip)?,
        snr_db: AdversarialResult::perturbation_snr(original, &probe.clip),
        clip: probe.clip,
        queries_used,
        success,
        final_loss: probe.loss,
        loss_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upsample_hits_knots() {
        let z = [0.0, 1.0, -1.0];
        let up = upsample_linear(&z, 5);
        assert_eq!(up, vec![0.0, 0.5, 1.0, 0.0, -1.0]);
    }
}
