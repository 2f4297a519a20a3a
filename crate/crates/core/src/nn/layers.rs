use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::{Error, Result};

/// One layer of a [`Sequential`] network.
///
/// `Conv1d` slides over the time axis of a `[time × channels]` input with
/// valid padding. `MeanPool` averages over time, producing a vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerSpec {
    Conv1d { in_ch: usize, out_ch: usize, kernel: usize },
    Relu,
    MeanPool,
    Dense { in_dim: usize, out_dim: usize },
}

impl LayerSpec {
    pub fn param_count(&self) -> usize {
        match *self {
            LayerSpec::Conv1d { in_ch, out_ch, kernel } => out_ch * kernel * in_ch + out_ch,
            LayerSpec::Dense { in_dim, out_dim } => out_dim * in_dim + out_dim,
            LayerSpec::Relu | LayerSpec::MeanPool => 0,
        }
    }

    fn fan_in(&self) -> usize {
        match *self {
            LayerSpec::Conv1d { in_ch, kernel, .. } => in_ch * kernel,
            LayerSpec::Dense { in_dim, .. } => in_dim,
            _ => 0,
        }
    }

    /// Number of weights (the bias follows them in the parameter view).
    fn weight_count(&self) -> usize {
        match *self {
            LayerSpec::Conv1d { in_ch, out_ch, kernel } => out_ch * kernel * in_ch,
            LayerSpec::Dense { in_dim, out_dim } => out_dim * in_dim,
            _ => 0,
        }
    }

    pub fn forward(&self, p: &[f64], x: &Tensor) -> Result<Tensor> {
        match *self {
            LayerSpec::Conv1d { in_ch, out_ch, kernel } => {
                if x.shape().len() != 2 || x.cols() != in_ch || x.rows() < kernel {
                    return Err(Error::Shape(format!(
                        "conv1d expects [>= {kernel} × {in_ch}], got {:?}",
                        x.shape()
                    )));
                }
                let t_out = x.rows() - kernel + 1;
                let block = kernel * in_ch;
                let (w, b) = p.split_at(out_ch * block);
                let xd = x.data();
                let mut y = Vec::with_capacity(t_out * out_ch);
                for t in 0..t_out {
                    let window = &xd[t * in_ch..t * in_ch + block];
                    for o in 0..out_ch {
                        y.push(b[o] + dot(&w[o * block..(o + 1) * block], window));
                    }
                }
                Tensor::new(vec![t_out, out_ch], y)
            }
            LayerSpec::Relu => {
                let mut y = x.clone();
                y.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
                Ok(y)
            }
            LayerSpec::MeanPool => {
                let (rows, cols) = (x.rows(), x.cols());
                if x.shape().len() != 2 || rows == 0 {
                    return Err(Error::Shape(format!("mean pool expects [T × C], got {:?}", x.shape())));
                }
                let mut y = vec![0.0; cols];
                for row in x.data().chunks_exact(cols) {
                    for (a, b) in y.iter_mut().zip(row) {
                        *a += b;
                    }
                }
                y.iter_mut().for_each(|v| *v /= rows as f64);
                Ok(Tensor::vector(y))
            }
            LayerSpec::Dense { in_dim, out_dim } => {
                if x.len() != in_dim {
                    return Err(Error::Shape(format!(
                        "dense expects {in_dim} inputs, got {:?}",
                        x.shape()
                    )));
                }
                let (w, b) = p.split_at(out_dim * in_dim);
                let y = (0..out_dim)
                    .map(|o| b[o] + dot(&w[o * in_dim..(o + 1) * in_dim], x.data()))
                    .collect();
                Ok(Tensor::vector(y))
            }
        }
    }

    /// Accumulates parameter gradients into `gp` and returns the input gradient.
    pub fn backward(&self, p: &[f64], x: &Tensor, y: &Tensor, gy: &Tensor, gp: &mut [f64]) -> Tensor {
        match *self {
            LayerSpec::Conv1d { in_ch, out_ch, kernel } => {
                let block = kernel * in_ch;
                let t_out = y.rows();
                let (w, _) = p.split_at(out_ch * block);
                let (gw, gb) = gp.split_at_mut(out_ch * block);
                let xd = x.data();
                let mut gx = Tensor::zeros(x.shape().to_vec());
                let gxd = gx.data_mut();
                for t in 0..t_out {
                    let off = t * in_ch;
                    for o in 0..out_ch {
                        let g = gy.data()[t * out_ch + o];
                        if g == 0.0 {
                            continue;
                        }
                        gb[o] += g;
                        axpy(g, &xd[off..off + block], &mut gw[o * block..(o + 1) * block]);
                        axpy(g, &w[o * block..(o + 1) * block], &mut gxd[off..off + block]);
                    }
                }
                gx
            }
            LayerSpec::Relu => {
                let mut gx = gy.clone();
                for (g, v) in gx.data_mut().iter_mut().zip(x.data()) {
                    if *v <= 0.0 {
                        *g = 0.0;
                    }
                }
                gx
            }
            LayerSpec::MeanPool => {
                let (rows, cols) = (x.rows(), x.cols());
                let mut gx = Vec::with_capacity(rows * cols);
                for _ in 0..rows {
                    gx.extend(gy.data().iter().map(|g| g / rows as f64));
                }
                Tensor::new(x.shape().to_vec(), gx).expect("pool gradient shape")
            }
            LayerSpec::Dense { in_dim, out_dim } => {
                let (w, _) = p.split_at(out_dim * in_dim);
                let (gw, gb) = gp.split_at_mut(out_dim * in_dim);
                let mut gx = vec![0.0; in_dim];
                for o in 0..out_dim {
                    let g = gy.data()[o];
                    gb[o] += g;
                    axpy(g, x.data(), &mut gw[o * in_dim..(o + 1) * in_dim]);
                    axpy(g, &w[o * in_dim..(o + 1) * in_dim], &mut gx);
                }
                Tensor::new(x.shape().to_vec(), gx).expect("dense gradient shape")
            }
        }
    }
}

/// Dot product with four independent accumulators.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Activations recorded by [`Sequential::forward_tape`]: the input followed by
/// every layer output.
#[derive(Debug, Clone)]
pub struct Tape {
    pub acts: Vec<Tensor>,
}

impl Tape {
    pub fn output(&self) -> &Tensor {
        self.acts.last().expect("tape holds the input")
    }
}

/// Layer stack with a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequential {
    layers: Vec<LayerSpec>,
    params: Vec<f64>,
    offsets: Vec<usize>,
}

impl Sequential {
    pub fn from_parts(layers: Vec<LayerSpec>, params: Vec<f64>) -> Result<Self> {
        let mut offsets = Vec::with_capacity(layers.len() + 1);
        let mut total = 0;
        for l in &layers {
            offsets.push(total);
            total += l.param_count();
        }
        offsets.push(total);
        if params.len() != total {
            return Err(Error::Shape(format!(
                "layer stack needs {total} parameters, got {}",
                params.len()
            )));
        }
        Ok(Self {
            layers,
            params,
            offsets,
        })
    }

    /// He-uniform weights and zero biases.
    pub fn init(layers: Vec<LayerSpec>, rng: &mut impl Rng) -> Self {
        let mut params = Vec::new();
        for l in &layers {
            let fan_in = l.fan_in().max(1) as f64;
            let bound = (6.0 / fan_in).sqrt();
            params.extend((0..l.weight_count()).map(|_| rng.gen_range(-bound..bound)));
            params.extend(std::iter::repeat_n(0.0, l.param_count() - l.weight_count()));
        }
        Self::from_parts(layers, params).expect("init parameter count")
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Parameter range of layer `i`.
    pub fn layer_range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    /// Zeroes the parameters of layer `i`.
    pub fn zero_layer(&mut self, i: usize) {
        let r = self.layer_range(i);
        self.params[r].iter_mut().for_each(|v| *v = 0.0);
    }

    /// Copies out layers `range` as an independent network.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Sequential {
        let start = self.offsets[range.start];
        let end = self.offsets[range.end];
        Self::from_parts(self.layers[range].to_vec(), self.params[start..end].to_vec()).expect("slice parameter count")
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut cur = x.clone();
        for (i, l) in self.layers.iter().enumerate() {
            cur = l.forward(&self.params[self.layer_range(i)], &cur)?;
        }
        Ok(cur)
    }

    pub fn forward_tape(&self, x: &Tensor) -> Result<Tape> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.clone());
        for (i, l) in self.layers.iter().enumerate() {
            let y = l.forward(&self.params[self.layer_range(i)], acts.last().unwrap())?;
            acts.push(y);
        }
        Ok(Tape { acts })
    }

    /// Reverse pass; adds into `grad` (same layout as the parameters) and
    /// returns the gradient with respect to the network input.
    pub fn backward(&self, tape: &Tape, grad_out: &Tensor, grad: &mut [f64]) -> Tensor {
        debug_assert_eq!(grad.len(), self.params.len());
        let mut g = grad_out.clone();
        for i in (0..self.layers.len()).rev() {
            let r = self.layer_range(i);
            g = self.layers[i].backward(
                &self.params[r.clone()],
                &tape.acts[i],
                &tape.acts[i + 1],
                &g,
                &mut grad[r],
            );
        }
        g
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy of `softmax(logits)` against `label` and its logit gradient,
/// using log-sum-exp so large logits stay finite.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|v| (v - max).exp()).sum();
    let lse = max + sum.ln();
    let loss = lse - logits[label];
    let mut grad = softmax(logits);
    grad[label] -= 1.0;
    (loss, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn random_tensor(shape: Vec<usize>, rng: &mut impl Rng) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Scalar objective: weighted sum of outputs with fixed random weights.
    fn check_layer(spec: LayerSpec, in_shape: Vec<usize>) {
        let mut rng = seed::rng(3);
        let params: Vec<f64> = (0..spec.param_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = random_tensor(in_shape, &mut rng);
        let y = spec.forward(&params, &x).unwrap();
        let wts: Vec<f64> = (0..y.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let obj = |p: &[f64], x: &Tensor| dot(spec.forward(p, x).unwrap().data(), &wts);
        let gy = Tensor::new(y.shape().to_vec(), wts.clone()).unwrap();
        let mut gp = vec![0.0; params.len()];
        let gx = spec.backward(&params, &x, &y, &gy, &mut gp);
        let eps = 1e-4;
        for i in 0..params.len() {
            let mut pp = params.clone();
            pp[i] += eps;
            let mut pm = params.clone();
            pm[i] -= eps;
            let fd = (obj(&pp, &x) - obj(&pm, &x)) / (2.0 * eps);
            assert!(rel_err(gp[i], fd) < 1e-4, "{spec:?} param {i}: {} vs {fd}", gp[i]);
        }
        for i in 0..x.len() {
            // keep clear of the relu kink
            if matches!(spec, LayerSpec::Relu) && x.data()[i].abs() < 2.0 * eps {
                continue;
            }
            let mut xp = x.clone();
            xp.data_mut()[i] += eps;
            let mut xm = x.clone();
            xm.data_mut()[i] -= eps;
            let fd = (obj(&params, &xp) - obj(&params, &xm)) / (2.0 * eps);
            assert!(rel_err(gx.data()[i], fd) < 1e-4, "{spec:?} input {i}");
        }
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
    }

    #[test]
    fn every_layer_matches_finite_differences() {
        check_layer(
            LayerSpec::Conv1d {
                in_ch: 3,
                out_ch: 4,
                kernel: 3,
            },
            vec![7, 3],
        );
        check_layer(LayerSpec::Relu, vec![5, 3]);
        check_layer(LayerSpec::MeanPool, vec![6, 4]);
        check_layer(LayerSpec::Dense { in_dim: 5, out_dim: 3 }, vec![5]);
    }

    #[test]
    fn cross_entropy_is_stable() {
        let (loss, g) = softmax_cross_entropy(&[1e4, -1e4, 0.0], 0);
        assert!(loss.is_finite() && loss.abs() < 1e-9);
        assert!(g.iter().all(|v| v.is_finite()));
        let (loss, _) = softmax_cross_entropy(&[1e4, -1e4, 0.0], 1);
        assert!((loss - 2e4).abs() < 1e-6);
        let (loss, _) = softmax_cross_entropy(&[0.0; 10], 4);
        assert!((loss - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn shape_errors() {
        let d = LayerSpec::Dense { in_dim: 3, out_dim: 2 };
        assert!(d.forward(&[0.0; 8], &Tensor::vector(vec![0.0; 4])).is_err());
        assert!(Sequential::from_parts(vec![d], vec![0.0; 7]).is_err());
    }
}
