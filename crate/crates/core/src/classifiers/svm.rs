use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One-vs-rest linear SVM with hinge loss.
///
/// Each class `k` minimizes
/// `0.5 * (|w|^2 + b^2) + c * sum_i max(0, 1 - y_i (w.x_i + b))`
/// with `y_i = +1` for class `k` and `-1` otherwise. The bias is handled as
/// a weight on a constant unit feature. Training is dual coordinate descent
/// over a seeded sample order, stopped when the projected-gradient range
/// falls below the tolerance or the epoch cap is reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub c: f64,
    pub epochs_run: Vec<usize>,
}

/// Binary solution for one class.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySvm {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub epochs: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Primal objective of the binary problem with targets `y` in {-1, +1}.
pub fn primal_objective(weights: &[f64], bias: f64, x: &[Vec<f64>], y: &[f64], c: f64) -> f64 {
    let reg = 0.5 * (dot(weights, weights) + bias * bias);
    let hinge: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (1.0 - yi * (dot(weights, xi) + bias)).max(0.0))
        .sum();
    reg + c * hinge
}

/// Dual coordinate descent for the binary problem.
pub fn fit_binary(x: &[Vec<f64>], y: &[f64], c: f64, max_epochs: usize, tolerance: f64, seed: u64) -> BinarySvm {
    let n = x.len();
    let d = x.first().map_or(0, Vec::len);
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut alpha = vec![0.0; n];
    let diag: Vec<f64> = x.iter().map(|xi| dot(xi, xi) + 1.0).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut epochs = 0;
    while epochs < max_epochs {
        epochs += 1;
        order.shuffle(&mut rng);
        let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
        for &i in &order {
            let g = y[i] * (dot(&w, &x[i]) + b) - 1.0;
            let pg = if alpha[i] <= 0.0 {
                g.min(0.0)
            } else if alpha[i] >= c {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / diag[i]).clamp(0.0, c);
                let delta = (alpha[i] - old) * y[i];
                if delta != 0.0 {
                    w.iter_mut().zip(&x[i]).for_each(|(wj, xj)| *wj += delta * xj);
                    b += delta;
                }
            }
        }
        if pg_max - pg_min < tolerance {
            break;
        }
    }
    BinarySvm {
        weights: w,
        bias: b,
        epochs,
    }
}

impl LinearSvm {
    pub fn fit(
        x: &[Vec<f64>],
        labels: &[usize],
        class_count: usize,
        c: f64,
        max_epochs: usize,
        tolerance: f64,
        seed: u64,
    ) -> Result<LinearSvm> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("soft margin c = {c} must be positive")));
        }
        let present = {
            let mut seen = vec![false; class_count];
            labels.iter().for_each(|&l| seen[l] = true);
            seen.iter().filter(|&&s| s).count()
        };
        if present < 2 {
            return Err(Error::InsufficientData("linear SVM needs at least two classes".into()));
        }
        let mut model = LinearSvm {
            weights: Vec::with_capacity(class_count),
            biases: Vec::with_capacity(class_count),
            c,
            epochs_run: Vec::with_capacity(class_count),
        };
        for k in 0..class_count {
            let y: Vec<f64> = labels.iter().map(|&l| if l == k { 1.0 } else { -1.0 }).collect();
            let fit = fit_binary(x, &y, c, max_epochs, tolerance, seed.wrapping_add(k as u64));
            model.weights.push(fit.weights);
            model.biases.push(fit.bias);
            model.epochs_run.push(fit.epochs);
        }
        Ok(model)
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| dot(w, x) + b)
            .collect()
    }
}
