//! Small fully-connected network with tanh hidden layers.
//!
//! Weights of each layer are stored input-major (`w[i * out + j]`), followed
//! by that layer's biases, so one input column is a contiguous slice. The
//! first layer takes a sparse input; observation matrices have at most one
//! nonzero per column, which keeps a forward pass cheap.

use rand::Rng;

use crate::error::{Error, Result};

/// Sparse input vector as `(index, value)` pairs.
pub type SparseInput = [(usize, f64)];

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
    // (weight offset, bias offset) per layer
    offsets: Vec<(usize, usize)>,
}

/// Cached activations of one forward pass.
#[derive(Debug, Clone)]
pub struct Activations {
    /// Post-tanh output of each hidden layer.
    pub hidden: Vec<Vec<f64>>,
    /// Pre-head output of the last layer.
    pub output: Vec<f64>,
}

fn layout(sizes: &[usize]) -> (Vec<(usize, usize)>, usize) {
    let mut offsets = Vec::with_capacity(sizes.len() - 1);
    let mut at = 0;
    for w in sizes.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        offsets.push((at, at + fan_in * fan_out));
        at += fan_in * fan_out + fan_out;
    }
    (offsets, at)
}

impl Mlp {
    /// Uniform weights in `±1/sqrt(fan_in)`, zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidConfig(format!("bad layer sizes {sizes:?}")));
        }
        let (offsets, total) = layout(sizes);
        let mut params = vec![0.0; total];
        for (l, &(w_off, b_off)) in offsets.iter().enumerate() {
            let bound = 1.0 / (sizes[l] as f64).sqrt();
            for p in &mut params[w_off..b_off] {
                *p = rng.gen_range(-bound..bound);
            }
        }
        Ok(Self { sizes: sizes.to_vec(), params, offsets })
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidConfig(format!("bad layer sizes {sizes:?}")));
        }
        let (offsets, total) = layout(sizes);
        if params.len() != total {
            return Err(Error::DimensionMismatch { expected: total, got: params.len() });
        }
        Ok(Self { sizes: sizes.to_vec(), params, offsets })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    fn check_input(&self, x: &SparseInput) -> Result<()> {
        match x.iter().find(|&&(i, _)| i >= self.sizes[0]) {
            Some(&(i, _)) => Err(Error::DimensionMismatch { expected: self.sizes[0], got: i + 1 }),
            None => Ok(()),
        }
    }

    pub fn forward(&self, x: &SparseInput) -> Result<Activations> {
        self.check_input(x)?;
        let n_layers = self.offsets.len();
        let mut hidden = Vec::with_capacity(n_layers - 1);

        let (w_off, b_off) = self.offsets[0];
        let fan_out = self.sizes[1];
        let mut z = self.params[b_off..b_off + fan_out].to_vec();
        for &(i, v) in x {
            if v == 0.0 {
                continue;
            }
            let col = &self.params[w_off + i * fan_out..w_off + (i + 1) * fan_out];
            for (zj, wij) in z.iter_mut().zip(col) {
                *zj += wij * v;
            }
        }

        for l in 1..n_layers {
            z.iter_mut().for_each(|v| *v = v.tanh());
            let (w_off, b_off) = self.offsets[l];
            let fan_out = self.sizes[l + 1];
            let mut next = self.params[b_off..b_off + fan_out].to_vec();
            for (i, &a) in z.iter().enumerate() {
                let col = &self.params[w_off + i * fan_out..w_off + (i + 1) * fan_out];
                for (nj, wij) in next.iter_mut().zip(col) {
                    *nj += wij * a;
                }
            }
            hidden.push(z);
            z = next;
        }
        Ok(Activations { hidden, output: z })
    }

    /// Backpropagates `grad_output` (gradient w.r.t. the pre-head output)
    /// to the pre-activation gradient of every layer.
    pub fn deltas(&self, acts: &Activations, grad_output: &[f64]) -> Vec<Vec<f64>> {
        let n_layers = self.offsets.len();
        let mut deltas = vec![Vec::new(); n_layers];
        deltas[n_layers - 1] = grad_output.to_vec();
        for l in (1..n_layers).rev() {
            let (w_off, _) = self.offsets[l];
            let fan_out = self.sizes[l + 1];
            let h = &acts.hidden[l - 1];
            let d = &deltas[l];
            let prev: Vec<f64> = (0..self.sizes[l])
                .map(|i| {
                    let col = &self.params[w_off + i * fan_out..w_off + (i + 1) * fan_out];
                    let s: f64 = col.iter().zip(d).map(|(w, dj)| w * dj).sum();
                    s * (1.0 - h[i] * h[i])
                })
                .collect();
            deltas[l - 1] = prev;
        }
        deltas
    }

    /// `params += step * dOutput/dParams · grad_output`, given precomputed deltas.
    pub fn apply(&mut self, x: &SparseInput, acts: &Activations, deltas: &[Vec<f64>], step: f64) {
        for (l, d) in deltas.iter().enumerate() {
            let (w_off, b_off) = self.offsets[l];
            let fan_out = self.sizes[l + 1];
            let scaled: Vec<f64> = d.iter().map(|v| v * step).collect();
            if l == 0 {
                for &(i, v) in x {
                    if v == 0.0 {
                        continue;
                    }
                    let col = &mut self.params[w_off + i * fan_out..w_off + (i + 1) * fan_out];
                    for (w, s) in col.iter_mut().zip(&scaled) {
                        *w += s * v;
                    }
                }
            } else {
                for (i, &a) in acts.hidden[l - 1].iter().enumerate() {
                    let col = &mut self.params[w_off + i * fan_out..w_off + (i + 1) * fan_out];
                    for (w, s) in col.iter_mut().zip(&scaled) {
                        *w += s * a;
                    }
                }
            }
            for (b, s) in self.params[b_off..b_off + fan_out].iter_mut().zip(&scaled) {
                *b += s;
            }
        }
    }

    /// Dense parameter gradient for the given deltas.
    pub fn gradient(&self, x: &SparseInput, acts: &Activations, deltas: &[Vec<f64>]) -> Vec<f64> {
        let mut probe = Self { sizes: self.sizes.clone(), params: vec![0.0; self.params.len()], offsets: self.offsets.clone() };
        probe.apply(x, acts, deltas, 1.0);
        probe.params
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
