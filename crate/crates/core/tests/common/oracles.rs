//! Independent reference computations checked against the library.

use bbaudio::attack::estimate_gradient;
use bbaudio::bayes::{flipout_forward, kl_gaussian, VariationalDense};
use bbaudio::dataset::synthesize_clip;
use bbaudio::detect::{wasserstein_1d, EmpiricalDist};
use bbaudio::dsp::AudioClip;
use bbaudio::harness::metrics::auc;
use bbaudio::nn::{ClassifierModel, ModelConfig, Tensor};
use bbaudio::seed;
use rand::Rng;
use rand_distr::StandardNormal;

pub type Check = Result<String, String>;

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Minimum-cost matching between equal-size samples, by exhaustion.
pub fn brute_force_w1(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    permutations(n)
        .iter()
        .map(|p| p.iter().enumerate().map(|(i, &j)| (a[i] - b[j]).abs()).sum::<f64>() / n as f64)
        .fold(f64::INFINITY, f64::min)
}

pub fn w1_matches_assignment(trials: usize) -> Check {
    let mut rng = seed::rng(101);
    let mut worst = 0.0f64;
    for t in 0..trials {
        let n = 1 + t % 8;
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let got = wasserstein_1d(
            &EmpiricalDist::new(a.clone()).map_err(|e| e.to_string())?,
            &EmpiricalDist::new(b.clone()).map_err(|e| e.to_string())?,
        );
        let want = brute_force_w1(&a, &b);
        worst = worst.max((got - want).abs());
        if (got - want).abs() > 1e-9 {
            return Err(format!("trial {t}: W1 {got} vs assignment {want}"));
        }
    }
    Ok(format!("{trials} trials, max |diff| {worst:.2e}"))
}

/// Fraction of (positive, negative) pairs ranked correctly, ties counting half.
pub fn pair_count_auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut wins = 0.0;
    for p in pos {
        for n in neg {
            if p > n {
                wins += 1.0;
            } else if p == n {
                wins += 0.5;
            }
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

pub fn auc_matches_pair_counting(trials: usize) -> Check {
    let mut rng = seed::rng(202);
    for t in 0..trials {
        let np = rng.gen_range(1..=50);
        let nn = rng.gen_range(1..=50);
        // coarse values so ties are common
        let pos: Vec<f64> = (0..np).map(|_| rng.gen_range(0..12) as f64 * 0.5).collect();
        let neg: Vec<f64> = (0..nn).map(|_| rng.gen_range(0..12) as f64 * 0.5).collect();
        let got = auc(&pos, &neg).ok_or("auc undefined")?;
        let want = pair_count_auc(&pos, &neg);
        if got != want {
            return Err(format!("trial {t}: auc {got} vs pairs {want}"));
        }
    }
    Ok(format!("{trials} trials exact"))
}

fn random_layer(rng: &mut impl Rng, in_dim: usize, out_dim: usize, prior: f64) -> VariationalDense {
    let w: Vec<f64> = (0..in_dim * out_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..out_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut layer = VariationalDense::new(in_dim, out_dim, &w, &b, 0.5, prior).expect("layer");
    let n = layer.param_count() / 2;
    for rho in &mut layer.params_mut()[n..] {
        *rho = rng.gen_range(-2.0..1.0);
    }
    layer
}

fn log_normal(x: f64, mu: f64, sigma: f64) -> f64 {
    -0.5 * ((x - mu) / sigma).powi(2) - sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

/// Closed-form KL against `E_q[log q − log p]` from `samples` joint draws.
pub fn kl_matches_monte_carlo(samples: usize) -> Check {
    let mut rng = seed::rng(303);
    let prior = 0.8;
    let layer = random_layer(&mut rng, 3, 2, prior);
    let mu = layer.mu().to_vec();
    let sigma = layer.sigma();
    let closed = kl_gaussian(&layer);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let mut v = 0.0;
        for (m, s) in mu.iter().zip(&sigma) {
            let eps: f64 = rng.sample(StandardNormal);
            let w = m + s * eps;
            v += log_normal(w, *m, *s) - log_normal(w, 0.0, prior);
        }
        sum += v;
        sum_sq += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    let se = ((sum_sq / n - mean * mean) / n).sqrt();
    if (closed - mean).abs() <= 3.0 * se {
        Ok(format!("closed {closed:.5} vs MC {mean:.5} ± {se:.5}"))
    } else {
        Err(format!("closed {closed} vs MC {mean} (SE {se})"))
    }
}

/// d-scaled random-direction estimate of ∇‖z‖²/2 at a random point.
pub fn zo_matches_quadratic_gradient(d: usize, draws: usize) -> Check {
    let mut rng = seed::rng(404);
    let z0: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let f = |z: &[f64]| -> bbaudio::Result<f64> { Ok(0.5 * z.iter().map(|v| v * v).sum::<f64>()) };
    let f0 = f(&z0).map_err(|e| e.to_string())?;
    let g = estimate_gradient(f, &z0, f0, draws, 1e-3, d as f64, &mut rng).map_err(|e| e.to_string())?;
    let err: f64 = g.iter().zip(&z0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = z0.iter().map(|v| v * v).sum::<f64>().sqrt();
    let rel = err / norm;
    if rel <= 0.05 {
        Ok(format!("d {d}, q {draws}: relative error {rel:.4}"))
    } else {
        Err(format!("relative error {rel} > 0.05"))
    }
}

fn small_model(seed_value: u64) -> ClassifierModel {
    let cfg = ModelConfig {
        n_mels: 8,
        conv1_channels: 3,
        conv2_channels: 3,
        kernel: 3,
        hidden: 5,
    };
    let mut m = ClassifierModel::new(&cfg, seed_value);
    let mut rng = seed::rng(seed_value + 1);
    for p in m.net.params_mut() {
        *p += rng.gen_range(-0.3..0.3);
    }
    m
}

fn relative(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Classifier cross-entropy gradient against central differences.
pub fn classifier_gradient_matches_fd(coords: usize) -> Check {
    let model = small_model(5);
    let clips: Vec<AudioClip> = (0..3)
        .map(|c| synthesize_clip(c, 90 + c as u64, "fd").expect("clip"))
        .collect();
    let batch: Vec<(&AudioClip, usize)> = clips.iter().zip([0, 1, 2]).collect();
    let (_, grad) = model.loss_and_grad(&batch).map_err(|e| e.to_string())?;
    let mut rng = seed::rng(505);
    let eps = 1e-4;
    let mut worst = 0.0f64;
    for _ in 0..coords {
        let i = rng.gen_range(0..grad.len());
        let mut plus = model.clone();
        plus.net.params_mut()[i] += eps;
        let mut minus = model.clone();
        minus.net.params_mut()[i] -= eps;
        let lp = plus.loss_and_grad(&batch).map_err(|e| e.to_string())?.0;
        let lm = minus.loss_and_grad(&batch).map_err(|e| e.to_string())?.0;
        let fd = (lp - lm) / (2.0 * eps);
        let r = relative(grad[i], fd, 1e-8);
        worst = worst.max(r);
        if r >= 1e-4 {
            return Err(format!("param {i}: analytic {} vs fd {fd}", grad[i]));
        }
    }
    Ok(format!("{coords} coordinates, max rel {worst:.2e}"))
}

/// ELBO gradient (fixed Flipout seed) against central differences.
pub fn elbo_gradient_matches_fd(coords: usize) -> Check {
    let base = small_model(6);
    let bnn = bbaudio::bayes::BnnClassifier::from_classifier(&base, 0.2, 1.0).map_err(|e| e.to_string())?;
    let clips: Vec<AudioClip> = (0..3)
        .map(|c| synthesize_clip(c, 60 + c as u64, "elbo").expect("clip"))
        .collect();
    let feats: Vec<Tensor> = clips
        .iter()
        .map(|c| bnn.frontend.features(c).expect("features"))
        .collect();
    let batch: Vec<(&Tensor, usize)> = feats.iter().zip([0, 1, 2]).collect();
    let kl_w = 0.01;
    let (_, grad) = bnn.elbo_loss(&batch, 42, kl_w).map_err(|e| e.to_string())?;
    let p0 = bnn.params_flat();
    let mut rng = seed::rng(606);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..coords {
        let i = rng.gen_range(0..p0.len());
        let mut p = p0.clone();
        p[i] += h;
        let mut plus = bnn.clone();
        plus.set_params_flat(&p).map_err(|e| e.to_string())?;
        p[i] -= 2.0 * h;
        let mut minus = bnn.clone();
        minus.set_params_flat(&p).map_err(|e| e.to_string())?;
        let lp = plus.elbo_loss(&batch, 42, kl_w).map_err(|e| e.to_string())?.0;
        let lm = minus.elbo_loss(&batch, 42, kl_w).map_err(|e| e.to_string())?.0;
        let fd = (lp - lm) / (2.0 * h);
        let r = relative(grad[i], fd, 1e-6);
        worst = worst.max(r);
        if r >= 1e-3 {
            return Err(format!("param {i}: analytic {} vs fd {fd}", grad[i]));
        }
    }
    Ok(format!("{coords} coordinates, max rel {worst:.2e}"))
}

/// Mean Flipout output over `calls` seeds equals the mean-weight output.
pub fn flipout_unbiased(calls: usize) -> Check {
    let mut rng = seed::rng(707);
    let layer = random_layer(&mut rng, 4, 3, 1.0);
    let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let expected = layer.mean_forward(&x);
    let mut sum = [0.0; 3];
    let mut sum_sq = [0.0; 3];
    for s in 0..calls {
        let out = flipout_forward(&layer, &[&x], s as u64).map_err(|e| e.to_string())?;
        for (o, v) in out.outputs[0].iter().enumerate() {
            sum[o] += v;
            sum_sq[o] += v * v;
        }
    }
    let n = calls as f64;
    let mut worst = 0.0f64;
    for o in 0..3 {
        let mean = sum[o] / n;
        let se = ((sum_sq[o] / n - mean * mean) / n).sqrt();
        let z = (mean - expected[o]).abs() / se;
        worst = worst.max(z);
        if z > 3.0 {
            return Err(format!("output {o}: mean {mean} vs {} ({z:.2} SE)", expected[o]));
        }
    }
    Ok(format!("{calls} calls, max deviation {worst:.2} SE"))
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Perturbations of two identical inputs in one batch are uncorrelated.
pub fn flipout_decorrelated(calls: usize) -> Check {
    let mut rng = seed::rng(808);
    let layer = random_layer(&mut rng, 4, 3, 1.0);
    let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mean = layer.mean_forward(&x);
    let mut rows = vec![(Vec::with_capacity(calls), Vec::with_capacity(calls)); 3];
    let mut differ = 0usize;
    for s in 0..calls {
        let out = flipout_forward(&layer, &[&x, &x], s as u64).map_err(|e| e.to_string())?;
        if out.outputs[0] != out.outputs[1] {
            differ += 1;
        }
        for o in 0..3 {
            rows[o].0.push(out.outputs[0][o] - mean[o]);
            rows[o].1.push(out.outputs[1][o] - mean[o]);
        }
    }
    let worst = rows.iter().map(|(a, b)| correlation(a, b).abs()).fold(0.0f64, f64::max);
    if worst > 0.05 {
        return Err(format!("cross-example correlation {worst}"));
    }
    if (differ as f64) < 0.99 * calls as f64 {
        return Err(format!("rows differed in only {differ} of {calls} calls"));
    }
    Ok(format!("max |ρ| {worst:.4}, rows differ in {differ}/{calls}"))
}

/// Same seed gives bit-identical outputs; a different seed does not.
pub fn flipout_seed_deterministic() -> Check {
    let mut rng = seed::rng(909);
    let layer = random_layer(&mut rng, 4, 3, 1.0);
    let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let a = flipout_forward(&layer, &[&x, &x], 17).map_err(|e| e.to_string())?;
    let b = flipout_forward(&layer, &[&x, &x], 17).map_err(|e| e.to_string())?;
    let c = flipout_forward(&layer, &[&x, &x], 18).map_err(|e| e.to_string())?;
    let bits = |o: &[Vec<f64>]| o.iter().flatten().map(|v| v.to_bits()).collect::<Vec<u64>>();
    if bits(&a.outputs) != bits(&b.outputs) {
        return Err("same seed produced different bits".into());
    }
    if bits(&a.outputs) == bits(&c.outputs) {
        return Err("different seeds produced identical outputs".into());
    }
    Ok("bit-exact".into())
}
