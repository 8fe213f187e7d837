use std::collections::BTreeSet;

use rand::seq::SliceRandom;

use super::lstm::{encode_window, Workspace};
use super::params::{ModelParams, ModelShape, Weights, INIT_RANGE};
use super::{ModelError, Vocab};
use crate::corpus::TrainingSet;
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub window_size: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Per-tensor gradient norm bound.
    pub gradient_clip: f64,
    /// Halve the learning rate every this many epochs; 0 disables decay.
    pub lr_halve_every: usize,
    pub rng_seed: u64,
    pub checkpoint_epochs: BTreeSet<usize>,
    pub shape: ModelShape,
    pub optimizer: Optimizer,
}

/// Update rule applied after per-tensor gradient clipping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Optimizer {
    pub const ADAM: Optimizer = Optimizer::Adam { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 };
}

impl std::str::FromStr for Optimizer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(Optimizer::Sgd),
            "adam" => Ok(Optimizer::ADAM),
            other => Err(format!("unknown optimizer '{other}' (expected sgd or adam)")),
        }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            window_size: 64,
            batch_size: 1,
            learning_rate: DEFAULT_LEARNING_RATE,
            gradient_clip: 5.0,
            lr_halve_every: 10,
            rng_seed: 42,
            checkpoint_epochs: [10, 20, 30, 40, 50].into_iter().collect(),
            shape: ModelShape::FULL,
            optimizer: Optimizer::ADAM,
        }
    }
}

pub const DEFAULT_LEARNING_RATE: f64 = 0.003;

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.window_size == 0 || self.batch_size == 0 {
            return bad("window and batch sizes must be positive");
        }
        if !(self.learning_rate > 0.0 && self.gradient_clip > 0.0) {
            return bad("learning rate and gradient clip must be positive");
        }
        if self.shape.hidden_size == 0 || self.shape.num_layers == 0 {
            return bad("model must have at least one layer of at least one unit");
        }
        if self.checkpoint_epochs.iter().any(|&e| e == 0 || e > self.epochs) {
            return bad("checkpoint epochs must lie in [1, epochs]");
        }
        Ok(())
    }

    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        match self.lr_halve_every {
            0 => self.learning_rate,
            n => self.learning_rate * 0.5f64.powi(((epoch - 1) / n) as i32),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub epoch: usize,
    /// Mean per-character cross-entropy over the epoch's windows.
    pub training_loss: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct EpochReport {
    pub epoch: usize,
    pub training_loss: f64,
    pub learning_rate: f64,
}

fn clip_factor(g: &super::Tensor, clip: f64) -> f64 {
    let norm = g.norm();
    if norm > clip {
        clip / norm
    } else {
        1.0
    }
}

/// Scale each gradient tensor to norm at most `clip`, then step.
pub(crate) fn apply_update(weights: &mut Weights, grads: &Weights, lr: f64, clip: f64) {
    for (p, g) in weights.tensors_mut().into_iter().zip(grads.tensors()) {
        let step = lr * clip_factor(g, clip);
        p.data.iter_mut().zip(&g.data).for_each(|(w, d)| *w -= step * d);
    }
}

/// First and second moment estimates for Adam.
struct AdamState {
    m: Weights,
    v: Weights,
    t: i32,
}

impl AdamState {
    fn new(like: &Weights) -> Self {
        AdamState { m: like.zeros_like(), v: like.zeros_like(), t: 0 }
    }

    fn apply(&mut self, weights: &mut Weights, grads: &Weights, lr: f64, clip: f64, (b1, b2, eps): (f64, f64, f64)) {
        self.t += 1;
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let params = weights.tensors_mut();
        let moments = self.m.tensors_mut().into_iter().zip(self.v.tensors_mut());
        for ((p, g), (m, v)) in params.into_iter().zip(grads.tensors()).zip(moments) {
            let f = clip_factor(g, clip);
            for i in 0..p.data.len() {
                let d = g.data[i] * f;
                m.data[i] = b1 * m.data[i] + (1.0 - b1) * d;
                v.data[i] = b2 * v.data[i] + (1.0 - b2) * d * d;
                p.data[i] -= lr * (m.data[i] / c1) / ((v.data[i] / c2).sqrt() + eps);
            }
        }
    }
}

pub fn train(trainset: &TrainingSet, config: &TrainConfig) -> Result<Vec<Checkpoint>, ModelError> {
    train_with_progress(trainset, config, |_| {})
}

/// Seeded minibatch descent over shuffled windows, hidden state reset per window.
pub fn train_with_progress(
    trainset: &TrainingSet,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochReport),
) -> Result<Vec<Checkpoint>, ModelError> {
    config.validate()?;
    if trainset.window_size() != config.window_size {
        return Err(ModelError::InvalidConfig(format!(
            "training set uses windows of {} but the configuration asks for {}",
            trainset.window_size(),
            config.window_size
        )));
    }
    if trainset.is_empty() {
        return Err(ModelError::InvalidConfig("empty training set".into()));
    }
    let mut rng = seeded(config.rng_seed);
    let vocab = Vocab::from_text(trainset.text());
    let mut params = ModelParams::init(vocab, config.shape, INIT_RANGE, &mut rng);

    let encoded: Vec<(Vec<usize>, Vec<usize>)> =
        trainset.windows().map(|(x, y)| encode_window(&params, x, y)).collect::<Result<_, _>>()?;
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    let mut ws = Workspace::new(&params, config.window_size);
    let mut grads = params.weights.zeros_like();
    let mut checkpoints = Vec::new();
    let mut adam = AdamState::new(&params.weights);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let lr = config.learning_rate_at(epoch);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            grads.scale(0.0);
            for &i in batch {
                let (x, y) = &encoded[i];
                total += ws.forward(&params, x, y);
                ws.backward(&params, x, y, &mut grads);
            }
            if batch.len() > 1 {
                grads.scale(1.0 / batch.len() as f64);
            }
            match config.optimizer {
                Optimizer::Sgd => apply_update(&mut params.weights, &grads, lr, config.gradient_clip),
                Optimizer::Adam { beta1, beta2, epsilon } => {
                    adam.apply(&mut params.weights, &grads, lr, config.gradient_clip, (beta1, beta2, epsilon))
                }
            }
        }
        let training_loss = total / encoded.len() as f64;
        if !training_loss.is_finite() || !params.weights.all_finite() {
            return Err(ModelError::Divergence { epoch });
        }
        on_epoch(&EpochReport { epoch, training_loss, learning_rate: lr });
        if config.checkpoint_epochs.contains(&epoch) {
            checkpoints.push(Checkpoint { params: params.clone(), epoch, training_loss });
        }
    }
    Ok(checkpoints)
}

/// Mean loss over a set of windows (no updates).
pub fn evaluate_loss<'a>(
    params: &ModelParams,
    windows: impl IntoIterator<Item = (&'a [u8], &'a [u8])>,
) -> Result<f64, ModelError> {
    let mut total = 0.0;
    let mut n = 0usize;
    let mut ws: Option<Workspace> = None;
    for (x, y) in windows {
        let (x, y) = encode_window(params, x, y)?;
        let w = match &mut ws {
            Some(w) if w.len() == x.len() => w,
            _ => ws.insert(Workspace::new(params, x.len())),
        };
        total += w.forward(params, &x, &y);
        n += 1;
    }
    if n == 0 {
        return Err(ModelError::InvalidConfig("no windows to evaluate".into()));
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            window_size: 16,
            checkpoint_epochs: [epochs].into_iter().collect(),
            shape: ModelShape { hidden_size: 8, num_layers: 1 },
            ..TrainConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        let mut c = small_config(3);
        c.checkpoint_epochs.insert(4);
        assert!(c.validate().is_err());
        let mut c = small_config(3);
        c.learning_rate = 0.0;
        assert!(c.validate().is_err());
        assert!(small_config(3).validate().is_ok());
    }

    #[test]
    fn learning_rate_halves() {
        let c = TrainConfig { learning_rate: 0.4, lr_halve_every: 10, ..TrainConfig::default() };
        assert_eq!(c.learning_rate_at(1), 0.4);
        assert_eq!(c.learning_rate_at(10), 0.4);
        assert_eq!(c.learning_rate_at(11), 0.2);
        assert_eq!(c.learning_rate_at(21), 0.1);
    }

    #[test]
    fn clipped_update_norm_is_bounded() {
        let shape = ModelShape { hidden_size: 3, num_layers: 1 };
        let mut w = Weights::zeros(4, shape.hidden_size, 1);
        let mut g = w.zeros_like();
        for t in g.tensors_mut() {
            t.data.iter_mut().enumerate().for_each(|(i, x)| *x = 100.0 + i as f64);
        }
        let before = w.clone();
        apply_update(&mut w, &g, 0.1, 5.0);
        for (a, b) in w.tensors().into_iter().zip(before.tensors()) {
            let d: f64 = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            assert!(d <= 0.1 * 5.0 + 1e-12);
        }
    }

    #[test]
    fn first_adam_step_has_learning_rate_magnitude() {
        let mut w = Weights::zeros(3, 2, 1);
        let mut g = w.zeros_like();
        for t in g.tensors_mut() {
            t.data.iter_mut().enumerate().for_each(|(i, x)| *x = if i % 2 == 0 { 0.3 } else { -2.0 });
        }
        let mut adam = AdamState::new(&w);
        adam.apply(&mut w, &g, 0.01, 1e9, (0.9, 0.999, 1e-8));
        for (p, d) in w.tensors().into_iter().zip(g.tensors()) {
            for (x, dx) in p.data.iter().zip(&d.data) {
                assert!((x + 0.01 * dx.signum()).abs() < 1e-9, "{x} {dx}");
            }
        }
    }

    #[test]
    fn optimizer_names() {
        assert_eq!("Adam".parse::<Optimizer>().unwrap(), Optimizer::ADAM);
        assert_eq!("sgd".parse::<Optimizer>().unwrap(), Optimizer::Sgd);
        assert!("rmsprop".parse::<Optimizer>().is_err());
    }

    #[test]
    fn window_size_mismatch_is_rejected() {
        let ts = TrainingSet::from_text(b"1 0 obj 1 endobj\n".repeat(4), 8).unwrap();
        assert!(train(&ts, &small_config(1)).is_err());
    }
}
