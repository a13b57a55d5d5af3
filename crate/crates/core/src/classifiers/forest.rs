use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow_classifier, SplitRule, Tree};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForestKind {
    /// Bootstrap samples, best split over a random feature subset.
    RandomForest,
    /// Full sample, one random threshold per candidate feature.
    ExtraTrees,
}

/// Plurality-vote ensemble of unpruned Gini trees. Tree `t` draws from its
/// own generator seeded with `seed + t`, so the ensemble does not depend on
/// how trees are scheduled across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub kind: ForestKind,
    pub class_count: usize,
    pub trees: Vec<Tree<usize>>,
}

/// `floor(sqrt(d))`, at least 1.
pub fn features_per_split(d: usize) -> usize {
    ((d as f64).sqrt().floor() as usize).max(1)
}

impl Forest {
    pub fn fit(
        kind: ForestKind,
        x: &[Vec<f64>],
        labels: &[usize],
        class_count: usize,
        n_trees: usize,
        seed: u64,
    ) -> Result<Forest> {
        if n_trees == 0 {
            return Err(Error::InvalidParameter("forest needs at least one tree".into()));
        }
        let n = x.len();
        let mtry = features_per_split(x.first().map_or(0, Vec::len));
        let trees = (0..n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t as u64));
                let (samples, rule) = match kind {
                    ForestKind::RandomForest => {
                        ((0..n).map(|_| rng.random_range(0..n)).collect(), SplitRule::Best)
                    }
                    ForestKind::ExtraTrees => ((0..n).collect(), SplitRule::Random),
                };
                grow_classifier(x, labels, class_count, samples, mtry, rule, &mut rng)
            })
            .collect();
        Ok(Forest {
            kind,
            class_count,
            trees,
        })
    }

    pub fn votes(&self, x: &[f64]) -> Vec<f64> {
        let mut votes = vec![0.0; self.class_count];
        for tree in &self.trees {
            votes[tree.predict(x)] += 1.0;
        }
        votes
    }
}
