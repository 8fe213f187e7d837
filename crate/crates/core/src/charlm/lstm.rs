//! LSTM cell, softmax output, per-window cross-entropy and its gradient by
//! backpropagation through time.
//!
//! Cell equations, with `z = b + Wx·x + Wh·h_prev` split into four blocks:
//!
//! ```text
//! i = σ(z_i)   f = σ(z_f)   o = σ(z_o)   g = tanh(z_g)
//! c = f ⊙ c_prev + i ⊙ g
//! h = o ⊙ tanh(c)
//! ```
//!
//! Layer 0 receives a one-hot character; layer `l > 0` receives layer
//! `l-1`'s `h`. The top `h` is projected to logits and passed through a
//! softmax.

use super::params::{LayerWeights, ModelParams, Weights};
use super::ModelError;

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentState {
    pub h: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

impl RecurrentState {
    pub fn zeros(params: &ModelParams) -> Self {
        let h = params.hidden_size();
        let l = params.num_layers();
        RecurrentState { h: vec![vec![0.0; h]; l], c: vec![vec![0.0; h]; l] }
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

enum Input<'a> {
    OneHot(usize),
    Dense(&'a [f64]),
}

/// One cell step. `gates` (len 4H) receives post-activation gate values.
#[allow(clippy::too_many_arguments)]
fn cell(lw: &LayerWeights, input: Input<'_>, h_prev: &[f64], c_prev: &[f64], gates: &mut [f64], c: &mut [f64], tc: &mut [f64], h: &mut [f64]) {
    let hs = h_prev.len();
    gates.copy_from_slice(&lw.b.data);
    match input {
        Input::OneHot(j) => axpy(gates, 1.0, lw.wx.row(j)),
        Input::Dense(x) => {
            for (j, &xj) in x.iter().enumerate() {
                if xj != 0.0 {
                    axpy(gates, xj, lw.wx.row(j));
                }
            }
        }
    }
    for (k, &hk) in h_prev.iter().enumerate() {
        if hk != 0.0 {
            axpy(gates, hk, lw.wh.row(k));
        }
    }
    for v in &mut gates[..3 * hs] {
        *v = sigmoid(*v);
    }
    for v in &mut gates[3 * hs..] {
        *v = v.tanh();
    }
    for k in 0..hs {
        let (i, f, o, g) = (gates[k], gates[hs + k], gates[2 * hs + k], gates[3 * hs + k]);
        c[k] = f * c_prev[k] + i * g;
        tc[k] = c[k].tanh();
        h[k] = o * tc[k];
    }
}

fn logits_into(w: &Weights, h_top: &[f64], logits: &mut [f64]) {
    logits.copy_from_slice(&w.out_b.data);
    for (k, &hk) in h_top.iter().enumerate() {
        if hk != 0.0 {
            axpy(logits, hk, w.out_w.row(k));
        }
    }
}

/// In-place softmax; returns `log Σ exp(logit)`.
fn softmax_in_place(v: &mut [f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
    max + sum.ln()
}

impl ModelParams {
    /// Feed one character (by vocabulary index).
    pub fn step(&self, state: &mut RecurrentState, ch: usize) {
        let hs = self.hidden_size();
        let mut gates = vec![0.0; 4 * hs];
        let mut tc = vec![0.0; hs];
        let mut below: Option<Vec<f64>> = None;
        for (l, lw) in self.weights.layers.iter().enumerate() {
            let mut h = vec![0.0; hs];
            let mut c = vec![0.0; hs];
            let input = match &below {
                None => Input::OneHot(ch),
                Some(x) => Input::Dense(x),
            };
            cell(lw, input, &state.h[l], &state.c[l], &mut gates, &mut c, &mut tc, &mut h);
            state.c[l] = c;
            state.h[l] = h.clone();
            below = Some(h);
        }
    }

    /// Next-character distribution for the current state.
    pub fn distribution(&self, state: &RecurrentState) -> Vec<f64> {
        let mut p = vec![0.0; self.vocab.len()];
        logits_into(&self.weights, state.h.last().expect("at least one layer"), &mut p);
        softmax_in_place(&mut p);
        p
    }
}

/// Run `prefix` from `state` (zero state if `None`) and return the
/// distribution over the next character together with the final state.
pub fn forward(
    params: &ModelParams,
    prefix: &[u8],
    state: Option<RecurrentState>,
) -> Result<(Vec<f64>, RecurrentState), ModelError> {
    let encoded = params.vocab.encode(prefix)?;
    let mut state = state.unwrap_or_else(|| RecurrentState::zeros(params));
    for ch in encoded {
        params.step(&mut state, ch);
    }
    Ok((params.distribution(&state), state))
}

/// Mean per-character cross-entropy of predicting `target[k]` after
/// `input[..=k]`, from a zero state.
pub fn loss(params: &ModelParams, input: &[u8], target: &[u8]) -> Result<f64, ModelError> {
    let (x, y) = encode_window(params, input, target)?;
    let mut ws = Workspace::new(params, x.len());
    Ok(ws.forward(params, &x, &y))
}

/// Analytic gradient of [`loss`] with respect to every weight.
pub fn grad(params: &ModelParams, input: &[u8], target: &[u8]) -> Result<Weights, ModelError> {
    Ok(loss_and_grad(params, input, target)?.1)
}

pub fn loss_and_grad(params: &ModelParams, input: &[u8], target: &[u8]) -> Result<(f64, Weights), ModelError> {
    let (x, y) = encode_window(params, input, target)?;
    let mut g = params.weights.zeros_like();
    let mut ws = Workspace::new(params, x.len());
    let l = ws.forward(params, &x, &y);
    ws.backward(params, &x, &y, &mut g);
    Ok((l, g))
}

pub(crate) fn encode_window(params: &ModelParams, input: &[u8], target: &[u8]) -> Result<(Vec<usize>, Vec<usize>), ModelError> {
    if input.len() != target.len() {
        return Err(ModelError::InvalidConfig(format!(
            "window input has {} characters but target has {}",
            input.len(),
            target.len()
        )));
    }
    if input.is_empty() {
        return Err(ModelError::InvalidConfig("empty window".into()));
    }
    Ok((params.vocab.encode(input)?, params.vocab.encode(target)?))
}

/// Per-timestep activations kept for backpropagation. Reusable across
/// windows of the same length.
pub(crate) struct Workspace {
    steps: usize,
    hs: usize,
    layers: usize,
    vs: usize,
    gates: Vec<f64>,
    c: Vec<f64>,
    tc: Vec<f64>,
    h: Vec<f64>,
    probs: Vec<f64>,
    zeros: Vec<f64>,
}

impl Workspace {
    pub(crate) fn new(params: &ModelParams, steps: usize) -> Self {
        let hs = params.hidden_size();
        let layers = params.num_layers();
        let vs = params.vocab.len();
        Workspace {
            steps,
            hs,
            layers,
            vs,
            gates: vec![0.0; steps * layers * 4 * hs],
            c: vec![0.0; steps * layers * hs],
            tc: vec![0.0; steps * layers * hs],
            h: vec![0.0; steps * layers * hs],
            probs: vec![0.0; steps * vs],
            zeros: vec![0.0; hs],
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.steps
    }

    #[inline]
    fn idx(&self, t: usize, l: usize) -> std::ops::Range<usize> {
        let s = (t * self.layers + l) * self.hs;
        s..s + self.hs
    }

    #[inline]
    fn gidx(&self, t: usize, l: usize) -> std::ops::Range<usize> {
        let s = (t * self.layers + l) * 4 * self.hs;
        s..s + 4 * self.hs
    }

    /// Forward pass over a whole window; returns the mean loss.
    pub(crate) fn forward(&mut self, params: &ModelParams, x: &[usize], y: &[usize]) -> f64 {
        assert_eq!(x.len(), self.steps);
        let hs = self.hs;
        let mut total = 0.0;
        let mut h_prev = vec![0.0; hs];
        let mut c_prev = vec![0.0; hs];
        let mut input_buf = vec![0.0; hs];
        for t in 0..self.steps {
            for l in 0..self.layers {
                if t > 0 {
                    h_prev.copy_from_slice(&self.h[self.idx(t - 1, l)]);
                    c_prev.copy_from_slice(&self.c[self.idx(t - 1, l)]);
                } else {
                    h_prev.iter_mut().for_each(|v| *v = 0.0);
                    c_prev.iter_mut().for_each(|v| *v = 0.0);
                }
                let input = if l == 0 {
                    Input::OneHot(x[t])
                } else {
                    input_buf.copy_from_slice(&self.h[self.idx(t, l - 1)]);
                    Input::Dense(&input_buf)
                };
                let (gr, r) = (self.gidx(t, l), self.idx(t, l));
                cell(
                    &params.weights.layers[l],
                    input,
                    &h_prev,
                    &c_prev,
                    &mut self.gates[gr],
                    &mut self.c[r.clone()],
                    &mut self.tc[r.clone()],
                    &mut self.h[r],
                );
            }
            let top = self.idx(t, self.layers - 1);
            let p = &mut self.probs[t * self.vs..(t + 1) * self.vs];
            logits_into(&params.weights, &self.h[top], p);
            let target_logit = p[y[t]];
            let lse = softmax_in_place(p);
            total += lse - target_logit;
        }
        total / self.steps as f64
    }

    /// Accumulate the gradient of the mean loss into `g`. Must follow
    /// [`Workspace::forward`] on the same window.
    pub(crate) fn backward(&self, params: &ModelParams, x: &[usize], y: &[usize], g: &mut Weights) {
        let (hs, nl, vs) = (self.hs, self.layers, self.vs);
        let inv = 1.0 / self.steps as f64;
        let w = &params.weights;
        let mut dh_next = vec![vec![0.0; hs]; nl];
        let mut dc_next = vec![vec![0.0; hs]; nl];
        let mut dlogits = vec![0.0; vs];
        let mut dh = vec![0.0; hs];
        let mut dx = vec![0.0; hs];
        let mut dz = vec![0.0; 4 * hs];

        for t in (0..self.steps).rev() {
            dlogits.copy_from_slice(&self.probs[t * vs..(t + 1) * vs]);
            dlogits[y[t]] -= 1.0;
            dlogits.iter_mut().for_each(|v| *v *= inv);
            axpy(&mut g.out_b.data, 1.0, &dlogits);
            let h_top = &self.h[self.idx(t, nl - 1)];
            for k in 0..hs {
                axpy(g.out_w.row_mut(k), h_top[k], &dlogits);
                dh[k] = dot(w.out_w.row(k), &dlogits);
            }

            for l in (0..nl).rev() {
                let gates = &self.gates[self.gidx(t, l)];
                let tc = &self.tc[self.idx(t, l)];
                let (h_prev, c_prev) = if t > 0 {
                    (&self.h[self.idx(t - 1, l)], &self.c[self.idx(t - 1, l)])
                } else {
                    (&self.zeros[..], &self.zeros[..])
                };
                for k in 0..hs {
                    let (i, f, o, gg) = (gates[k], gates[hs + k], gates[2 * hs + k], gates[3 * hs + k]);
                    let dhk = dh[k] + dh_next[l][k];
                    let dc = dhk * o * (1.0 - tc[k] * tc[k]) + dc_next[l][k];
                    dz[k] = dc * gg * i * (1.0 - i);
                    dz[hs + k] = dc * c_prev[k] * f * (1.0 - f);
                    dz[2 * hs + k] = dhk * tc[k] * o * (1.0 - o);
                    dz[3 * hs + k] = dc * i * (1.0 - gg * gg);
                    dc_next[l][k] = dc * f;
                }
                let lw = &w.layers[l];
                let lg = &mut g.layers[l];
                axpy(&mut lg.b.data, 1.0, &dz);
                if l == 0 {
                    axpy(lg.wx.row_mut(x[t]), 1.0, &dz);
                } else {
                    let below = &self.h[self.idx(t, l - 1)];
                    for j in 0..hs {
                        axpy(lg.wx.row_mut(j), below[j], &dz);
                        dx[j] = dot(lw.wx.row(j), &dz);
                    }
                }
                for k in 0..hs {
                    if h_prev[k] != 0.0 {
                        axpy(lg.wh.row_mut(k), h_prev[k], &dz);
                    }
                    dh_next[l][k] = dot(lw.wh.row(k), &dz);
                }
                if l > 0 {
                    dh.copy_from_slice(&dx);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charlm::{ModelShape, Vocab};
    use crate::rng::seeded;

    fn toy(shape: ModelShape, text: &[u8], seed: u64, range: f64) -> ModelParams {
        ModelParams::init(Vocab::from_text(text), shape, range, &mut seeded(seed))
    }

    #[test]
    fn distribution_is_normalized() {
        let p = toy(ModelShape { hidden_size: 6, num_layers: 2 }, b"abc[]", 1, 0.5);
        let (dist, _) = forward(&p, b"obj [a", None).unwrap();
        assert!(dist.iter().all(|&x| x >= 0.0));
        assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_weights_give_uniform() {
        let p = ModelParams::zeros(Vocab::from_text(b"xyz"), ModelShape { hidden_size: 4, num_layers: 2 });
        let (dist, _) = forward(&p, b"obj", None).unwrap();
        let v = p.vocab.len() as f64;
        assert!(dist.iter().all(|&x| (x - 1.0 / v).abs() < 1e-12));
    }

    #[test]
    fn zero_weights_loss_is_log_vocab() {
        let vocab = Vocab::from_chars(b"obj endobj".iter().copied().collect::<std::collections::BTreeSet<_>>().into_iter().collect()).unwrap();
        // "obj endobj" has the distinct characters o b j space e n d.
        let p = ModelParams::zeros(vocab, ModelShape { hidden_size: 3, num_layers: 1 });
        let v = p.vocab.len() as f64;
        let l = loss(&p, b"obj en", b"bj end").unwrap();
        assert!((l - v.ln()).abs() < 1e-9);
    }

    #[test]
    fn unknown_character() {
        let p = toy(ModelShape { hidden_size: 2, num_layers: 1 }, b"a", 0, 0.1);
        assert!(matches!(forward(&p, b"q", None), Err(ModelError::UnknownChar(b'q'))));
        assert!(matches!(loss(&p, b"a", b"q"), Err(ModelError::UnknownChar(b'q'))));
    }

    #[test]
    fn forward_is_incremental() {
        let p = toy(ModelShape { hidden_size: 5, num_layers: 2 }, b"[]01", 3, 0.3);
        let (whole, _) = forward(&p, b"obj [01]", None).unwrap();
        let (_, s) = forward(&p, b"obj [", None).unwrap();
        let (rest, _) = forward(&p, b"01]", Some(s)).unwrap();
        assert_eq!(whole, rest);
    }

    #[test]
    fn workspace_matches_stepwise_forward() {
        let p = toy(ModelShape { hidden_size: 4, num_layers: 2 }, b"[]01 ", 5, 0.4);
        let input = b"obj [0 1]";
        let target = b"bj [0 1] ";
        let (x, y) = encode_window(&p, input, target).unwrap();
        let mut ws = Workspace::new(&p, x.len());
        let fast = ws.forward(&p, &x, &y);
        let mut state = RecurrentState::zeros(&p);
        let mut slow = 0.0;
        for (k, &c) in x.iter().enumerate() {
            p.step(&mut state, c);
            slow -= p.distribution(&state)[y[k]].ln();
        }
        slow /= x.len() as f64;
        assert!((fast - slow).abs() < 1e-12);
    }
}
