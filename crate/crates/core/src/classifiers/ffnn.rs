//! Dense network `input -> hidden relu -> hidden relu -> softmax`, trained
//! with sparse categorical cross-entropy and Adam.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FfnnConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for FfnnConfig {
    fn default() -> Self {
        FfnnConfig {
            hidden: 136,
            epochs: 5,
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Weights are stored flat: for each layer a row-major `out x in` matrix
/// followed by `out` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub sizes: [usize; 4],
    pub params: Vec<f64>,
    /// Mean training loss of each epoch.
    pub epoch_loss: Vec<f64>,
}

struct Layout {
    weights: [usize; 3],
    biases: [usize; 3],
    len: usize,
}

impl Network {
    fn layout(&self) -> Layout {
        let mut offset = 0;
        let mut weights = [0; 3];
        let mut biases = [0; 3];
        for l in 0..3 {
            weights[l] = offset;
            offset += self.sizes[l] * self.sizes[l + 1];
            biases[l] = offset;
            offset += self.sizes[l + 1];
        }
        Layout {
            weights,
            biases,
            len: offset,
        }
    }

    /// He-uniform weights (`U(-sqrt(6/fan_in), sqrt(6/fan_in))`), zero biases.
    pub fn init(inputs: usize, hidden: usize, classes: usize, seed: u64) -> Network {
        Self::init_with(inputs, hidden, classes, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn init_with<R: Rng>(inputs: usize, hidden: usize, classes: usize, rng: &mut R) -> Network {
        let mut net = Network {
            sizes: [inputs, hidden, hidden, classes],
            params: Vec::new(),
            epoch_loss: Vec::new(),
        };
        let layout = net.layout();
        net.params = vec![0.0; layout.len];
        for l in 0..3 {
            let fan_in = net.sizes[l];
            let limit = (6.0 / fan_in as f64).sqrt();
            let start = layout.weights[l];
            for w in &mut net.params[start..start + fan_in * net.sizes[l + 1]] {
                *w = rng.random_range(-limit..limit);
            }
        }
        net
    }

    pub fn train(x: &[Vec<f64>], labels: &[usize], classes: usize, config: &FfnnConfig, seed: u64) -> Result<Network> {
        let d = x.first().map_or(0, Vec::len);
        if d == 0 || config.hidden == 0 || config.batch_size == 0 {
            return Err(Error::InvalidParameter("network needs inputs, hidden units and a batch size".into()));
        }
        if x.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                actual: labels.len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Network::init_with(d, config.hidden, classes, &mut rng);
        let mut adam = Adam::new(net.params.len(), config);
        let mut order: Vec<usize> = (0..x.len()).collect();
        let mut grad = vec![0.0; net.params.len()];
        let mut scratch = Scratch::new(&net.sizes);
        for _ in 0..config.epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for batch in order.chunks(config.batch_size) {
                grad.iter_mut().for_each(|g| *g = 0.0);
                for &i in batch {
                    total += net.accumulate(&x[i], labels[i], &mut grad, &mut scratch);
                }
                let scale = 1.0 / batch.len() as f64;
                grad.iter_mut().for_each(|g| *g *= scale);
                adam.step(&mut net.params, &grad);
            }
            net.epoch_loss.push(total / x.len() as f64);
        }
        Ok(net)
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let mut scratch = Scratch::new(&self.sizes);
        self.forward(x, &mut scratch);
        scratch.acts[3].clone()
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.logits(x))
    }

    fn forward(&self, x: &[f64], s: &mut Scratch) {
        let layout = self.layout();
        s.acts[0].copy_from_slice(x);
        for l in 0..3 {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[layout.weights[l]..layout.weights[l] + n_in * n_out];
            let b = &self.params[layout.biases[l]..layout.biases[l] + n_out];
            let (before, after) = s.acts.split_at_mut(l + 1);
            let input = &before[l];
            let out = &mut after[0];
            for j in 0..n_out {
                let row = &w[j * n_in..(j + 1) * n_in];
                let z = b[j] + row.iter().zip(input.iter()).map(|(a, c)| a * c).sum::<f64>();
                out[j] = if l < 2 { z.max(0.0) } else { z };
            }
        }
    }

    /// Adds the gradient of one sample's cross-entropy into `grad` and
    /// returns the loss.
    fn accumulate(&self, x: &[f64], label: usize, grad: &mut [f64], s: &mut Scratch) -> f64 {
        self.forward(x, s);
        let probs = softmax(&s.acts[3]);
        let loss = -probs[label].max(f64::MIN_POSITIVE).ln();
        s.deltas[3].copy_from_slice(&probs);
        s.deltas[3][label] -= 1.0;
        let layout = self.layout();
        for l in (0..3).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w_off = layout.weights[l];
            let b_off = layout.biases[l];
            let (lower, upper) = s.deltas.split_at_mut(l + 1);
            let delta_out = &upper[0];
            let input = &s.acts[l];
            for j in 0..n_out {
                let dj = delta_out[j];
                grad[b_off + j] += dj;
                if dj != 0.0 {
                    let g_row = &mut grad[w_off + j * n_in..w_off + (j + 1) * n_in];
                    g_row.iter_mut().zip(input.iter()).for_each(|(g, a)| *g += dj * a);
                }
            }
            if l > 0 {
                let delta_in = &mut lower[l];
                delta_in.iter_mut().for_each(|v| *v = 0.0);
                let w = &self.params[w_off..w_off + n_in * n_out];
                for j in 0..n_out {
                    let dj = delta_out[j];
                    if dj != 0.0 {
                        let row = &w[j * n_in..(j + 1) * n_in];
                        delta_in.iter_mut().zip(row).for_each(|(d, wv)| *d += dj * wv);
                    }
                }
                // relu derivative
                delta_in
                    .iter_mut()
                    .zip(input.iter())
                    .for_each(|(d, a)| if *a <= 0.0 { *d = 0.0 });
            }
        }
        loss
    }

    /// Mean cross-entropy over a batch and its gradient with respect to
    /// [`Network::params`].
    pub fn loss_and_gradient(&self, x: &[Vec<f64>], labels: &[usize]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let mut scratch = Scratch::new(&self.sizes);
        let mut loss = 0.0;
        for (xi, &yi) in x.iter().zip(labels) {
            loss += self.accumulate(xi, yi, &mut grad, &mut scratch);
        }
        let n = x.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        (loss / n, grad)
    }

    pub fn mean_loss(&self, x: &[Vec<f64>], labels: &[usize]) -> f64 {
        let total: f64 = x
            .iter()
            .zip(labels)
            .map(|(xi, &yi)| -self.probabilities(xi)[yi].max(f64::MIN_POSITIVE).ln())
            .sum();
        total / x.len().max(1) as f64
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

struct Scratch {
    acts: [Vec<f64>; 4],
    deltas: [Vec<f64>; 4],
}

impl Scratch {
    fn new(sizes: &[usize; 4]) -> Self {
        Scratch {
            acts: sizes.map(|n| vec![0.0; n]),
            deltas: sizes.map(|n| vec![0.0; n]),
        }
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    fn new(n: usize, c: &FfnnConfig) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr: c.learning_rate,
            beta1: c.beta1,
            beta2: c.beta2,
            eps: c.epsilon,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}
