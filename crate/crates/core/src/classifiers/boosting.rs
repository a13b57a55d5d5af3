use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow_regressor, Node, PresortedColumns, Tree};
use crate::error::{Error, Result};

/// One-vs-rest logistic gradient boosting.
///
/// For each class an additive score starts at the class log-odds; every
/// stage fits a depth-limited regression tree to the negative log-loss
/// gradient `y - p` and sets each leaf to a Newton step scaled by the
/// learning rate. When a leaf's step would raise that leaf's log-loss it is
/// halved until it does not, so the training loss never increases between
/// stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoosting {
    pub learning_rate: f64,
    pub initial: Vec<f64>,
    /// `stages[k]` are the trees of class `k`.
    pub stages: Vec<Vec<Tree<f64>>>,
    /// Mean binary log-loss summed over classes, before the first stage
    /// and after every stage.
    pub train_loss: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(f)) - y * f`.
fn logistic_loss(f: f64, y: f64) -> f64 {
    let softplus = if f > 0.0 { f + (-f).exp().ln_1p() } else { f.exp().ln_1p() };
    softplus - y * f
}

const MAX_HALVINGS: usize = 40;

struct ClassFit {
    initial: f64,
    trees: Vec<Tree<f64>>,
    losses: Vec<f64>,
}

fn fit_class(data: &PresortedColumns, y: &[f64], n_stages: usize, learning_rate: f64, max_depth: usize) -> ClassFit {
    let n = y.len();
    let p0 = (y.iter().sum::<f64>() / n as f64).clamp(1e-6, 1.0 - 1e-6);
    let initial = (p0 / (1.0 - p0)).ln();
    let mut f = vec![initial; n];
    let mean_loss = |f: &[f64]| f.iter().zip(y).map(|(&fi, &yi)| logistic_loss(fi, yi)).sum::<f64>() / n as f64;
    let mut losses = vec![mean_loss(&f)];
    let mut trees = Vec::with_capacity(n_stages);
    let mut residual = vec![0.0; n];

    for _ in 0..n_stages {
        for i in 0..n {
            residual[i] = y[i] - sigmoid(f[i]);
        }
        let (mut tree, leaf_of) = grow_regressor(data, &residual, max_depth);
        let n_nodes = tree.nodes.len();
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
        for (i, &leaf) in leaf_of.iter().enumerate() {
            members[leaf].push(i);
        }
        for (leaf, idx) in members.iter().enumerate() {
            if idx.is_empty() {
                continue;
            }
            let (mut num, mut den) = (0.0, 0.0);
            for &i in idx {
                let p = sigmoid(f[i]);
                num += residual[i];
                den += p * (1.0 - p);
            }
            let mut step = if den > 1e-12 { learning_rate * num / den } else { 0.0 };
            let before: f64 = idx.iter().map(|&i| logistic_loss(f[i], y[i])).sum();
            let mut halvings = 0;
            while step != 0.0 {
                let after: f64 = idx.iter().map(|&i| logistic_loss(f[i] + step, y[i])).sum();
                if after <= before {
                    break;
                }
                halvings += 1;
                step = if halvings > MAX_HALVINGS { 0.0 } else { step / 2.0 };
            }
            for &i in idx {
                f[i] += step;
            }
            tree.nodes[leaf] = Node::Leaf(step);
        }
        trees.push(tree);
        losses.push(mean_loss(&f));
    }
    ClassFit { initial, trees, losses }
}

impl GradientBoosting {
    pub fn fit(
        x: &[Vec<f64>],
        labels: &[usize],
        class_count: usize,
        n_stages: usize,
        learning_rate: f64,
        max_depth: usize,
    ) -> Result<GradientBoosting> {
        if !learning_rate.is_finite() || learning_rate <= 0.0 || max_depth == 0 {
            return Err(Error::InvalidParameter(format!(
                "boosting learning rate {learning_rate} / depth {max_depth}"
            )));
        }
        let data = PresortedColumns::new(x);
        let fits: Vec<ClassFit> = (0..class_count)
            .into_par_iter()
            .map(|k| {
                let y: Vec<f64> = labels.iter().map(|&l| if l == k { 1.0 } else { 0.0 }).collect();
                fit_class(&data, &y, n_stages, learning_rate, max_depth)
            })
            .collect();
        let mut train_loss = vec![0.0; n_stages + 1];
        for fit in &fits {
            train_loss.iter_mut().zip(&fit.losses).for_each(|(t, l)| *t += l);
        }
        let (initial, stages) = fits.into_iter().map(|fit| (fit.initial, fit.trees)).unzip();
        Ok(GradientBoosting {
            learning_rate,
            initial,
            stages,
            train_loss,
        })
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.initial
            .iter()
            .zip(&self.stages)
            .map(|(init, trees)| init + trees.iter().map(|t| t.predict(x)).sum::<f64>())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::argmax;
    use crate::classifiers::testdata::{blobs, random_set};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_stages_predicts_majority() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y = [2, 2, 2, 2, 1, 1, 0, 0, 0, 2];
        let gb = GradientBoosting::fit(&x, &y, 3, 0, 0.1, 3).unwrap();
        for v in &x {
            assert_eq!(argmax(&gb.scores(v)), 2);
        }
    }

    #[test]
    fn loss_never_increases() {
        let data = random_set(150, 6, 3, 17);
        let gb = GradientBoosting::fit(data.vectors(), data.labels(), 3, 60, 0.1, 3).unwrap();
        assert_eq!(gb.train_loss.len(), 61);
        for w in gb.train_loss.windows(2) {
            assert!(w[1] <= w[0], "{} -> {}", w[0], w[1]);
        }
        assert!(gb.train_loss[60] < gb.train_loss[0]);
    }

    #[test]
    fn learns_separable_blobs() {
        let data = blobs(&[vec![0.0, 0.0], vec![4.0, 0.0], vec![0.0, 4.0]], 40, 5);
        let gb = GradientBoosting::fit(data.vectors(), data.labels(), 3, 50, 0.1, 3).unwrap();
        let correct = data
            .vectors()
            .iter()
            .zip(data.labels())
            .filter(|(v, &l)| argmax(&gb.scores(v)) == l)
            .count();
        assert!(correct as f64 / data.len() as f64 > 0.95);
    }

    #[test]
    fn learns_xor() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..400 {
            let (a, b) = (i % 2, (i / 2) % 2);
            x.push(vec![
                a as f64 * 4.0 - 2.0 + rng.random_range(-1.0..1.0),
                b as f64 * 4.0 - 2.0 + rng.random_range(-1.0..1.0),
            ]);
            y.push(a ^ b);
        }
        let gb = GradientBoosting::fit(&x, &y, 2, 100, 0.1, 3).unwrap();
        let correct = x.iter().zip(&y).filter(|(v, &l)| argmax(&gb.scores(v)) == l).count();
        assert!(correct as f64 / 400.0 >= 0.95, "{correct} of 400");
    }
}
