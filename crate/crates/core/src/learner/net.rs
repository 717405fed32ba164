use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::LearnerError;
use crate::rng::StreamRng;

/// Layer sizes of a dueling network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetShape {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub actions: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Dense {
    offset: usize,
    n_in: usize,
    n_out: usize,
}

impl Dense {
    fn weights(&self) -> Range<usize> {
        self.offset..self.offset + self.n_in * self.n_out
    }

    fn bias(&self) -> Range<usize> {
        let start = self.offset + self.n_in * self.n_out;
        start..start + self.n_out
    }

    fn len(&self) -> usize {
        (self.n_in + 1) * self.n_out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Layers {
    trunk: Vec<Dense>,
    value: Dense,
    advantage: Dense,
    total: usize,
}

impl Layers {
    fn new(shape: &NetShape) -> Self {
        let mut offset = 0;
        let mut next = |n_in, n_out| {
            let d = Dense { offset, n_in, n_out };
            offset += d.len();
            d
        };
        let mut trunk = Vec::with_capacity(shape.hidden.len());
        let mut width = shape.input;
        for &h in &shape.hidden {
            trunk.push(next(width, h));
            width = h;
        }
        let value = next(width, 1);
        let advantage = next(width, shape.actions);
        Self { trunk, value, advantage, total: offset }
    }
}

/// Intermediate activations of a batched forward pass, kept for backprop.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    batch: usize,
    /// `acts[0]` is the input, `acts[l + 1]` the ReLU output of trunk layer `l`.
    acts: Vec<Vec<f64>>,
    /// `batch × actions`, row-major.
    pub q: Vec<f64>,
}

/// Dueling Q-network: a ReLU MLP trunk feeding a scalar value head and an
/// advantage head, combined as `q = V + A − mean(A)`.
///
/// Parameters live in one flat vector. Each dense layer stores its weights
/// input-major (`w[i · n_out + j]` connects input `i` to output `j`)
/// followed by its biases; layers are ordered trunk, value, advantage.
#[derive(Debug, Clone, PartialEq)]
pub struct DuelingQNet {
    shape: NetShape,
    layers: Layers,
    params: Vec<f64>,
}

impl DuelingQNet {
    pub fn zeros(shape: NetShape) -> Self {
        let layers = Layers::new(&shape);
        let params = vec![0.0; layers.total];
        Self { shape, layers, params }
    }

    /// He-uniform trunk, small uniform heads, zero biases.
    pub fn init(shape: NetShape, rng: &mut StreamRng) -> Self {
        let mut net = Self::zeros(shape);
        let layers = net.layers.clone();
        for d in &layers.trunk {
            let bound = (6.0 / d.n_in as f64).sqrt();
            for w in &mut net.params[d.weights()] {
                *w = rng.random_range(-bound..bound);
            }
        }
        for d in [&layers.value, &layers.advantage] {
            let bound = (1.0 / d.n_in as f64).sqrt() * 0.1;
            for w in &mut net.params[d.weights()] {
                *w = rng.random_range(-bound..bound);
            }
        }
        net
    }

    pub fn from_params(shape: NetShape, params: Vec<f64>) -> Result<Self, LearnerError> {
        let layers = Layers::new(&shape);
        if params.len() != layers.total {
            return Err(LearnerError::ShapeMismatch { expected: layers.total, got: params.len() });
        }
        Ok(Self { shape, layers, params })
    }

    pub fn shape(&self) -> &NetShape {
        &self.shape
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn num_actions(&self) -> usize {
        self.shape.actions
    }

    /// Parameter range of the advantage head's output biases.
    pub fn advantage_bias(&self) -> Range<usize> {
        self.layers.advantage.bias()
    }

    /// Parameter range of the value head's output bias.
    pub fn value_bias(&self) -> Range<usize> {
        self.layers.value.bias()
    }

    /// Order-sensitive 64-bit FNV-1a digest of the parameter bits.
    pub fn digest(&self) -> u64 {
        self.params.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, p| {
            p.to_bits().to_le_bytes().iter().fold(h, |h, &b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
        })
    }

    pub fn q_values(&self, obs: &[f64]) -> Result<Vec<f64>, LearnerError> {
        if obs.len() != self.shape.input {
            return Err(LearnerError::ShapeMismatch { expected: self.shape.input, got: obs.len() });
        }
        Ok(self.forward(obs, 1).q)
    }

    /// Batched forward pass; `inputs` is `batch × input`, row-major.
    pub fn forward(&self, inputs: &[f64], batch: usize) -> ForwardCache {
        assert_eq!(inputs.len(), batch * self.shape.input, "input batch has the wrong length");
        let mut acts = Vec::with_capacity(self.layers.trunk.len() + 1);
        acts.push(inputs.to_vec());
        for d in &self.layers.trunk {
            let mut out = Vec::new();
            dense_forward(&self.params, d, acts.last().unwrap(), batch, &mut out);
            out.iter_mut().for_each(|v| *v = v.max(0.0));
            acts.push(out);
        }
        let h = acts.last().unwrap();
        let mut value = Vec::new();
        let mut adv = Vec::new();
        dense_forward(&self.params, &self.layers.value, h, batch, &mut value);
        dense_forward(&self.params, &self.layers.advantage, h, batch, &mut adv);
        let n = self.shape.actions;
        for (row, v) in adv.chunks_exact_mut(n).zip(&value) {
            let mean = row.iter().sum::<f64>() / n as f64;
            row.iter_mut().for_each(|a| *a += v - mean);
        }
        ForwardCache { batch, acts, q: adv }
    }

    /// Accumulates `∂L/∂θ` into `grad` given `dq = ∂L/∂q` (`batch × actions`).
    pub fn backward(&self, cache: &ForwardCache, dq: &[f64], grad: &mut [f64]) {
        let batch = cache.batch;
        let n = self.shape.actions;
        assert_eq!(dq.len(), batch * n);
        assert_eq!(grad.len(), self.params.len());

        // q = v + a − mean(a): ∂/∂a_k = dq_k − mean(dq), ∂/∂v = Σ dq
        let mut d_adv = dq.to_vec();
        let mut d_val = vec![0.0; batch];
        for (row, dv) in d_adv.chunks_exact_mut(n).zip(d_val.iter_mut()) {
            let sum: f64 = row.iter().sum();
            let mean = sum / n as f64;
            row.iter_mut().for_each(|g| *g -= mean);
            *dv = sum;
        }

        let h = cache.acts.last().unwrap();
        let need_dh = true;
        let mut dh = vec![0.0; h.len()];
        dense_backward(&self.params, &self.layers.value, h, &d_val, batch, grad, need_dh.then_some(&mut dh));
        let mut dh_adv = vec![0.0; h.len()];
        dense_backward(&self.params, &self.layers.advantage, h, &d_adv, batch, grad, Some(&mut dh_adv));
        dh.iter_mut().zip(&dh_adv).for_each(|(a, b)| *a += b);

        let mut d_out = dh;
        for (l, d) in self.layers.trunk.iter().enumerate().rev() {
            // ReLU: pass gradient where the output was positive
            for (g, a) in d_out.iter_mut().zip(&cache.acts[l + 1]) {
                if *a <= 0.0 {
                    *g = 0.0;
                }
            }
            let x = &cache.acts[l];
            if l == 0 {
                dense_backward(&self.params, d, x, &d_out, batch, grad, None);
            } else {
                let mut dx = vec![0.0; x.len()];
                dense_backward(&self.params, d, x, &d_out, batch, grad, Some(&mut dx));
                d_out = dx;
            }
        }
    }
}

fn dense_forward(params: &[f64], d: &Dense, x: &[f64], batch: usize, out: &mut Vec<f64>) {
    let w = &params[d.weights()];
    let b = &params[d.bias()];
    out.clear();
    out.reserve(batch * d.n_out);
    for r in 0..batch {
        let start = out.len();
        out.extend_from_slice(b);
        let o = &mut out[start..];
        for (i, &xi) in x[r * d.n_in..(r + 1) * d.n_in].iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (oj, wij) in o.iter_mut().zip(&w[i * d.n_out..(i + 1) * d.n_out]) {
                *oj += xi * wij;
            }
        }
    }
}

fn dense_backward(
    params: &[f64],
    d: &Dense,
    x: &[f64],
    d_out: &[f64],
    batch: usize,
    grad: &mut [f64],
    dx: Option<&mut Vec<f64>>,
) {
    let (gw, gb) = grad[d.offset..d.offset + d.len()].split_at_mut(d.n_in * d.n_out);
    for r in 0..batch {
        let dor = &d_out[r * d.n_out..(r + 1) * d.n_out];
        gb.iter_mut().zip(dor).for_each(|(g, v)| *g += v);
        for (i, &xi) in x[r * d.n_in..(r + 1) * d.n_in].iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (g, v) in gw[i * d.n_out..(i + 1) * d.n_out].iter_mut().zip(dor) {
                *g += xi * v;
            }
        }
    }
    if let Some(dx) = dx {
        let w = &params[d.weights()];
        for r in 0..batch {
            let dor = &d_out[r * d.n_out..(r + 1) * d.n_out];
            for i in 0..d.n_in {
                let wi = &w[i * d.n_out..(i + 1) * d.n_out];
                dx[r * d.n_in + i] = wi.iter().zip(dor).map(|(a, b)| a * b).sum();
            }
        }
    }
}
