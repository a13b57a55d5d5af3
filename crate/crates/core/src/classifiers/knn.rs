use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stored (standardized) training vectors; majority vote among the `k`
/// nearest by Euclidean distance.
///
/// Ties: neighbors at equal distance are ordered by training index; classes
/// with equal votes are ordered by smaller summed distance, then lower code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub k: usize,
    pub class_count: usize,
    pub vectors: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl Knn {
    pub fn fit(vectors: Vec<Vec<f64>>, labels: Vec<usize>, class_count: usize, k: usize) -> Result<Knn> {
        if k == 0 || k > vectors.len() {
            return Err(Error::InvalidParameter(format!(
                "k = {k} must lie in 1..={}",
                vectors.len()
            )));
        }
        Ok(Knn {
            k,
            class_count,
            vectors,
            labels,
        })
    }

    /// Indices of the `k` nearest training vectors with their distances.
    pub fn neighbors(&self, x: &[f64]) -> Vec<(usize, f64)> {
        let mut d: Vec<(usize, f64)> = self
            .vectors
            .iter()
            .enumerate()
            .map(|(i, v)| (i, squared_distance(v, x)))
            .collect();
        let by_distance = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, by_distance);
            d.truncate(self.k);
        }
        d.sort_by(by_distance);
        d.into_iter().map(|(i, sq)| (i, sq.sqrt())).collect()
    }

    pub fn votes(&self, x: &[f64]) -> Vec<f64> {
        let mut votes = vec![0.0; self.class_count];
        for (i, _) in self.neighbors(x) {
            votes[self.labels[i]] += 1.0;
        }
        votes
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let mut votes = vec![0usize; self.class_count];
        let mut dist = vec![0.0; self.class_count];
        for (i, d) in self.neighbors(x) {
            votes[self.labels[i]] += 1;
            dist[self.labels[i]] += d;
        }
        (0..self.class_count)
            .min_by(|&a, &b| {
                votes[b]
                    .cmp(&votes[a])
                    .then(dist[a].total_cmp(&dist[b]))
                    .then(a.cmp(&b))
            })
            .unwrap_or(0)
    }
}
