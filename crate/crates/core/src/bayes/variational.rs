use rand::Rng;
use rand_distr::StandardNormal;

use crate::nn::layers::{axpy, dot};
use crate::{seed, Error, Result};

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Derivative of [`softplus`], the logistic sigmoid.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inverse of [`softplus`] for `s > 0`.
pub fn inverse_softplus(s: f64) -> f64 {
    s + (-(-s).exp_m1()).ln()
}

/// Dense layer with a factorized Gaussian posterior `N(μ, σ²)` per weight
/// and bias, `σ = softplus(ρ)`.
///
/// Parameters live in one flat vector laid out as
/// `[μ_W (out×in), μ_b (out), ρ_W (out×in), ρ_b (out)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalDense {
    in_dim: usize,
    out_dim: usize,
    params: Vec<f64>,
    prior_sigma: f64,
    /// Multiplies every σ at sampling time; 0 makes the layer deterministic.
    sigma_scale: f64,
}

impl VariationalDense {
    /// Builds a layer from mean weights (`out×in`, row-major) and biases, with
    /// every σ initialised to `init_sigma`.
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        mu_w: &[f64],
        mu_b: &[f64],
        init_sigma: f64,
        prior_sigma: f64,
    ) -> Result<Self> {
        if mu_w.len() != in_dim * out_dim || mu_b.len() != out_dim {
            return Err(Error::Shape(format!(
                "variational {in_dim}→{out_dim} got {} weights and {} biases",
                mu_w.len(),
                mu_b.len()
            )));
        }
        if !(init_sigma > 0.0 && prior_sigma > 0.0) {
            return Err(Error::InvalidArgument("sigmas must be positive".into()));
        }
        let rho = inverse_softplus(init_sigma);
        let n = in_dim * out_dim + out_dim;
        let mut params = Vec::with_capacity(2 * n);
        params.extend_from_slice(mu_w);
        params.extend_from_slice(mu_b);
        params.resize(2 * n, rho);
        Ok(Self {
            in_dim,
            out_dim,
            params,
            prior_sigma,
            sigma_scale: 1.0,
        })
    }

    /// Rebuilds a layer from a flat parameter vector.
    pub fn from_params(in_dim: usize, out_dim: usize, params: Vec<f64>, prior_sigma: f64) -> Result<Self> {
        if params.len() != 2 * (in_dim * out_dim + out_dim) {
            return Err(Error::Shape(format!(
                "variational {in_dim}→{out_dim} expects {} params, got {}",
                2 * (in_dim * out_dim + out_dim),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) || !(prior_sigma > 0.0) {
            return Err(Error::InvalidArgument("non-finite variational parameters".into()));
        }
        Ok(Self {
            in_dim,
            out_dim,
            params,
            prior_sigma,
            sigma_scale: 1.0,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn prior_sigma(&self) -> f64 {
        self.prior_sigma
    }

    pub fn sigma_scale(&self) -> f64 {
        self.sigma_scale
    }

    /// Scales every posterior σ at sampling time without touching ρ.
    pub fn with_sigma_scale(mut self, scale: f64) -> Self {
        self.sigma_scale = scale.max(0.0);
        self
    }

    fn n_weights(&self) -> usize {
        self.in_dim * self.out_dim + self.out_dim
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Means `[W, b]`.
    pub fn mu(&self) -> &[f64] {
        &self.params[..self.n_weights()]
    }

    pub fn rho(&self) -> &[f64] {
        &self.params[self.n_weights()..]
    }

    /// Effective standard deviations (including the sampling scale).
    pub fn sigma(&self) -> Vec<f64> {
        self.rho().iter().map(|&r| self.sigma_scale * softplus(r)).collect()
    }

    /// Deterministic output with weights fixed at μ.
    pub fn mean_forward(&self, x: &[f64]) -> Vec<f64> {
        let (w, b) = self.mu().split_at(self.in_dim * self.out_dim);
        w.chunks_exact(self.in_dim)
            .zip(b)
            .map(|(row, bias)| dot(row, x) + bias)
            .collect()
    }
}

/// Noise drawn for one Flipout call: a shared Gaussian perturbation plus
/// per-example sign vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FlipoutNoise {
    /// Standard normal draws for `[W, b]`.
    pub eps: Vec<f64>,
    /// Input-side signs, one row per example.
    pub r: Vec<Vec<f64>>,
    /// Output-side signs, one row per example.
    pub s: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlipoutOutput {
    /// Pre-activation outputs, one row per example.
    pub outputs: Vec<Vec<f64>>,
    pub noise: FlipoutNoise,
}

fn sign<R: Rng>(rng: &mut R) -> f64 {
    if rng.gen::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// Flipout forward pass: `y_b = μ_W x_b + μ_b + s_b ∘ (ΔW (r_b ∘ x_b) + Δb)`
/// with `ΔW = σ ∘ ε` shared across the batch and `r_b`, `s_b` random signs.
pub fn flipout_forward(layer: &VariationalDense, inputs: &[&[f64]], seed_value: u64) -> Result<FlipoutOutput> {
    let mut rng = seed::rng(seed_value);
    let n = layer.n_weights();
    let eps: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let mut r = Vec::with_capacity(inputs.len());
    let mut s = Vec::with_capacity(inputs.len());
    for _ in inputs {
        r.push((0..layer.in_dim).map(|_| sign(&mut rng)).collect::<Vec<_>>());
        s.push((0..layer.out_dim).map(|_| sign(&mut rng)).collect::<Vec<_>>());
    }
    let noise = FlipoutNoise { eps, r, s };
    let outputs = flipout_with_noise(layer, inputs, &noise)?;
    Ok(FlipoutOutput { outputs, noise })
}

pub(crate) fn flipout_with_noise(
    layer: &VariationalDense,
    inputs: &[&[f64]],
    noise: &FlipoutNoise,
) -> Result<Vec<Vec<f64>>> {
    let (ind, outd) = (layer.in_dim, layer.out_dim);
    let sigma = layer.sigma();
    let delta: Vec<f64> = sigma.iter().zip(&noise.eps).map(|(s, e)| s * e).collect();
    let (dw, db) = delta.split_at(ind * outd);
    let mut outputs = Vec::with_capacity(inputs.len());
    let mut rx = vec![0.0; ind];
    for (b, x) in inputs.iter().enumerate() {
        if x.len() != ind {
            return Err(Error::Shape(format!("flipout input {} vs {ind}", x.len())));
        }
        let mut y = layer.mean_forward(x);
        for i in 0..ind {
            rx[i] = noise.r[b][i] * x[i];
        }
        for (o, yo) in y.iter_mut().enumerate() {
            let pert = dot(&dw[o * ind..(o + 1) * ind], &rx) + db[o];
            *yo += noise.s[b][o] * pert;
        }
        outputs.push(y);
    }
    Ok(outputs)
}

/// Accumulates parameter gradients of a Flipout call into `grad` (same layout
/// as the layer parameters) and returns input gradients.
pub fn flipout_backward(
    layer: &VariationalDense,
    inputs: &[&[f64]],
    noise: &FlipoutNoise,
    grad_out: &[Vec<f64>],
    grad: &mut [f64],
) -> Vec<Vec<f64>> {
    let (ind, outd) = (layer.in_dim, layer.out_dim);
    let n = layer.n_weights();
    let sigma = layer.sigma();
    let delta: Vec<f64> = sigma.iter().zip(&noise.eps).map(|(s, e)| s * e).collect();
    let (mu_w, _) = layer.mu().split_at(ind * outd);
    let (g_mu, g_rho) = grad.split_at_mut(n);
    let mut g_delta = vec![0.0; n];
    let mut grad_in = Vec::with_capacity(inputs.len());
    let mut rx = vec![0.0; ind];
    for (b, x) in inputs.iter().enumerate() {
        let gy = &grad_out[b];
        for i in 0..ind {
            rx[i] = noise.r[b][i] * x[i];
        }
        let mut gx = vec![0.0; ind];
        let mut gpert = vec![0.0; ind];
        for o in 0..outd {
            let g = gy[o];
            let gs = g * noise.s[b][o];
            axpy(g, x, &mut g_mu[o * ind..(o + 1) * ind]);
            g_mu[ind * outd + o] += g;
            axpy(gs, &rx, &mut g_delta[o * ind..(o + 1) * ind]);
            g_delta[ind * outd + o] += gs;
            axpy(g, &mu_w[o * ind..(o + 1) * ind], &mut gx);
            axpy(gs, &delta[o * ind..(o + 1) * ind], &mut gpert);
        }
        for i in 0..ind {
            gx[i] += noise.r[b][i] * gpert[i];
        }
        grad_in.push(gx);
    }
    let scale = layer.sigma_scale;
    for (k, gr) in g_rho.iter_mut().enumerate() {
        *gr += g_delta[k] * noise.eps[k] * scale * sigmoid(layer.rho()[k]);
    }
    grad_in
}

/// `KL(q ‖ p)` summed over every weight and bias, with prior `N(0, σ_p²)`.
pub fn kl_gaussian(layer: &VariationalDense) -> f64 {
    let sp = layer.prior_sigma;
    layer
        .mu()
        .iter()
        .zip(layer.sigma())
        .map(|(m, s)| (sp / s).ln() + (s * s + m * m) / (2.0 * sp * sp) - 0.5)
        .sum()
}

/// Adds `weight · ∂KL/∂params` to `grad`.
pub fn kl_gradient(layer: &VariationalDense, weight: f64, grad: &mut [f64]) {
    let sp2 = layer.prior_sigma * layer.prior_sigma;
    let n = layer.n_weights();
    let sigma = layer.sigma();
    for k in 0..n {
        grad[k] += weight * layer.params[k] / sp2;
        let s = sigma[k];
        let ds = -1.0 / s + s / sp2;
        grad[n + k] += weight * ds * layer.sigma_scale * sigmoid(layer.params[n + k]);
    }
}
