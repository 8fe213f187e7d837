use rand::Rng as _;

use super::Vocab;
use crate::rng::Rng;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor { rows, cols, data: vec![0.0; rows * cols] }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Weights of one LSTM layer. Gate blocks along the `4H` axis are ordered
/// input, forget, output, candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    /// `in × 4H`; row `j` is added for input component `j`.
    pub wx: Tensor,
    /// `H × 4H`; row `k` is scaled by previous hidden unit `k`.
    pub wh: Tensor,
    /// `1 × 4H`.
    pub b: Tensor,
}

/// All trainable tensors. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub layers: Vec<LayerWeights>,
    /// `H × V` output projection.
    pub out_w: Tensor,
    /// `1 × V`.
    pub out_b: Tensor,
}

impl Weights {
    pub fn zeros(vocab_size: usize, hidden: usize, num_layers: usize) -> Self {
        let layers = (0..num_layers)
            .map(|l| {
                let input = if l == 0 { vocab_size } else { hidden };
                LayerWeights {
                    wx: Tensor::zeros(input, 4 * hidden),
                    wh: Tensor::zeros(hidden, 4 * hidden),
                    b: Tensor::zeros(1, 4 * hidden),
                }
            })
            .collect();
        Weights { layers, out_w: Tensor::zeros(hidden, vocab_size), out_b: Tensor::zeros(1, vocab_size) }
    }

    pub fn zeros_like(&self) -> Self {
        let hidden = self.out_w.rows;
        Weights::zeros(self.out_w.cols, hidden, self.layers.len())
    }

    /// Canonical tensor order: per layer `wx, wh, b`, then `out_w, out_b`.
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut v: Vec<&Tensor> = Vec::with_capacity(self.layers.len() * 3 + 2);
        for l in &self.layers {
            v.extend([&l.wx, &l.wh, &l.b]);
        }
        v.extend([&self.out_w, &self.out_b]);
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v: Vec<&mut Tensor> = Vec::with_capacity(self.layers.len() * 3 + 2);
        for l in &mut self.layers {
            v.extend([&mut l.wx, &mut l.wh, &mut l.b]);
        }
        v.extend([&mut self.out_w, &mut self.out_b]);
        v
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.data.iter().all(|x| x.is_finite()))
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            t.data.iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn add_assign(&mut self, other: &Weights) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.data.iter_mut().zip(&b.data).for_each(|(x, y)| *x += y);
        }
    }

    pub fn norm(&self) -> f64 {
        self.tensors().iter().map(|t| t.data.iter().map(|x| x * x).sum::<f64>()).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelShape {
    pub hidden_size: usize,
    pub num_layers: usize,
}

impl ModelShape {
    /// Two layers of 128 units.
    pub const FULL: ModelShape = ModelShape { hidden_size: 128, num_layers: 2 };
    /// One layer of 32 units, for CI and the desk-scale experiments.
    pub const TINY: ModelShape = ModelShape { hidden_size: 32, num_layers: 1 };
}

impl Default for ModelShape {
    fn default() -> Self {
        ModelShape::FULL
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub vocab: Vocab,
    pub weights: Weights,
}

pub const INIT_RANGE: f64 = 0.08;

impl ModelParams {
    pub fn zeros(vocab: Vocab, shape: ModelShape) -> Self {
        let weights = Weights::zeros(vocab.len(), shape.hidden_size, shape.num_layers);
        ModelParams { vocab, weights }
    }

    /// Uniform weights in `[-range, range]`, forget-gate biases set to 1.
    pub fn init(vocab: Vocab, shape: ModelShape, range: f64, rng: &mut Rng) -> Self {
        let mut p = Self::zeros(vocab, shape);
        for t in p.weights.tensors_mut() {
            for x in &mut t.data {
                *x = rng.gen_range(-range..=range);
            }
        }
        let h = shape.hidden_size;
        for l in &mut p.weights.layers {
            l.b.data[h..2 * h].iter_mut().for_each(|x| *x = 1.0);
        }
        p
    }

    pub fn hidden_size(&self) -> usize {
        self.weights.out_w.rows
    }

    pub fn num_layers(&self) -> usize {
        self.weights.layers.len()
    }

    pub fn shape(&self) -> ModelShape {
        ModelShape { hidden_size: self.hidden_size(), num_layers: self.num_layers() }
    }
}
