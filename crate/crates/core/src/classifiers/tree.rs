//! CART trees stored as flat node arrays.
//!
//! Classification trees (Gini impurity, grown until pure or fewer than two
//! samples) back the random forest and extra-trees ensembles; shallow
//! least-squares regression trees back gradient boosting. A sample goes
//! left when `x[feature] <= threshold`.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node<T> {
    Leaf(T),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree<T> {
    pub nodes: Vec<Node<T>>,
}

impl<T: Copy> Tree<T> {
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf(_) => return i,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> T {
        match &self.nodes[self.leaf_index(x)] {
            Node::Leaf(v) => *v,
            Node::Split { .. } => unreachable!("leaf_index stops at a leaf"),
        }
    }

    pub fn depth(&self) -> usize {
        fn walk<T>(nodes: &[Node<T>], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Midpoint between two distinct sorted values that still separates them.
fn split_point(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid >= hi {
        lo
    } else {
        mid
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitRule {
    /// Exhaustive search over midpoints of each candidate feature.
    Best,
    /// One uniformly drawn threshold per candidate feature.
    Random,
}

/// Most frequent class; ties go to the lower code.
fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

/// `n * gini = n - sum(c^2) / n`, the size-weighted impurity of a side.
fn weighted_gini(n: usize, sum_sq: f64) -> f64 {
    if n == 0 {
        0.0
    } else {
        n as f64 - sum_sq / n as f64
    }
}

struct ClassSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

/// Grows a classification tree over the rows `samples` of `x` (rows may
/// repeat, as in a bootstrap sample). Each node examines `max_features`
/// randomly chosen features, continuing past that count only while no valid
/// split has been found.
pub fn grow_classifier<R: Rng>(
    x: &[Vec<f64>],
    labels: &[usize],
    class_count: usize,
    samples: Vec<usize>,
    max_features: usize,
    rule: SplitRule,
    rng: &mut R,
) -> Tree<usize> {
    let d = x.first().map_or(0, Vec::len);
    let mut nodes: Vec<Node<usize>> = Vec::new();
    // (node slot, samples at node)
    let mut stack = vec![(0usize, samples)];
    nodes.push(Node::Leaf(0));
    let mut features: Vec<usize> = (0..d).collect();
    let mut order: Vec<usize> = Vec::new();

    while let Some((slot, idx)) = stack.pop() {
        let mut counts = vec![0usize; class_count];
        idx.iter().for_each(|&i| counts[labels[i]] += 1);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || idx.len() < 2 {
            nodes[slot] = Node::Leaf(majority(&counts));
            continue;
        }

        features.shuffle(rng);
        let mut best: Option<ClassSplit> = None;
        for (tried, &f) in features.iter().enumerate() {
            if tried >= max_features && best.is_some() {
                break;
            }
            let candidate = match rule {
                SplitRule::Best => best_gini_split(x, labels, class_count, &idx, f, &mut order),
                SplitRule::Random => random_gini_split(x, labels, class_count, &idx, f, rng),
            };
            if let Some(c) = candidate {
                if best.as_ref().is_none_or(|b| c.impurity < b.impurity) {
                    best = Some(c);
                }
            }
        }

        let Some(split) = best else {
            nodes[slot] = Node::Leaf(majority(&counts));
            continue;
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| x[i][split.feature] <= split.threshold);
        let left = nodes.len();
        let right = left + 1;
        nodes.push(Node::Leaf(0));
        nodes.push(Node::Leaf(0));
        nodes[slot] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        stack.push((right, right_idx));
        stack.push((left, left_idx));
    }
    Tree { nodes }
}

fn best_gini_split(
    x: &[Vec<f64>],
    labels: &[usize],
    class_count: usize,
    idx: &[usize],
    feature: usize,
    order: &mut Vec<usize>,
) -> Option<ClassSplit> {
    order.clear();
    order.extend_from_slice(idx);
    order.sort_by(|&a, &b| x[a][feature].total_cmp(&x[b][feature]).then(a.cmp(&b)));
    let n = order.len();
    let mut right = vec![0usize; class_count];
    order.iter().for_each(|&i| right[labels[i]] += 1);
    let mut left = vec![0usize; class_count];
    let mut left_sq = 0.0;
    let mut right_sq: f64 = right.iter().map(|&c| (c * c) as f64).sum();

    let mut best: Option<ClassSplit> = None;
    for pos in 0..n - 1 {
        let i = order[pos];
        let c = labels[i];
        left_sq += (2 * left[c] + 1) as f64;
        left[c] += 1;
        right_sq -= (2 * right[c] - 1) as f64;
        right[c] -= 1;
        let (lo, hi) = (x[i][feature], x[order[pos + 1]][feature]);
        if lo == hi {
            continue;
        }
        let n_left = pos + 1;
        let impurity = weighted_gini(n_left, left_sq) + weighted_gini(n - n_left, right_sq);
        if best.as_ref().is_none_or(|b| impurity < b.impurity) {
            best = Some(ClassSplit {
                feature,
                threshold: split_point(lo, hi),
                impurity,
            });
        }
    }
    best
}

fn random_gini_split<R: Rng>(
    x: &[Vec<f64>],
    labels: &[usize],
    class_count: usize,
    idx: &[usize],
    feature: usize,
    rng: &mut R,
) -> Option<ClassSplit> {
    let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
        (lo.min(x[i][feature]), hi.max(x[i][feature]))
    });
    if lo >= hi {
        return None;
    }
    let mut threshold = rng.random_range(lo..hi);
    if threshold >= hi {
        threshold = lo;
    }
    let mut left = vec![0usize; class_count];
    let mut right = vec![0usize; class_count];
    for &i in idx {
        if x[i][feature] <= threshold {
            left[labels[i]] += 1;
        } else {
            right[labels[i]] += 1;
        }
    }
    let side = |counts: &[usize]| {
        let n: usize = counts.iter().sum();
        weighted_gini(n, counts.iter().map(|&c| (c * c) as f64).sum())
    };
    Some(ClassSplit {
        feature,
        threshold,
        impurity: side(&left) + side(&right),
    })
}

/// Column-major copy of the training matrix with each column's row order
/// sorted ascending, shared by every regression tree of a boosting run.
pub struct PresortedColumns {
    pub columns: Vec<Vec<f64>>,
    pub sorted: Vec<Vec<u32>>,
}

impl PresortedColumns {
    pub fn new(x: &[Vec<f64>]) -> Self {
        let d = x.first().map_or(0, Vec::len);
        let columns: Vec<Vec<f64>> = (0..d).map(|f| x.iter().map(|row| row[f]).collect()).collect();
        let sorted = columns
            .iter()
            .map(|col| {
                let mut order: Vec<u32> = (0..col.len() as u32).collect();
                order.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                order
            })
            .collect();
        PresortedColumns { columns, sorted }
    }

    pub fn n_samples(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }
}

/// Least-squares regression tree of at most `max_depth` levels fitted to
/// `targets`, grown level by level. Returns the tree with zero leaf values
/// and, per sample, the index of the leaf it fell into; the caller assigns
/// leaf values.
pub fn grow_regressor(data: &PresortedColumns, targets: &[f64], max_depth: usize) -> (Tree<f64>, Vec<usize>) {
    const NONE: usize = usize::MAX;
    let n = data.n_samples();
    let mut nodes = vec![Node::Leaf(0.0)];
    let mut node_of = vec![0usize; n];
    let mut frontier = vec![0usize];

    for _ in 0..max_depth {
        // Per frontier node: sum, count.
        let slot_of = |node: usize, frontier: &[usize]| frontier.iter().position(|&f| f == node);
        let mut sum = vec![0.0; frontier.len()];
        let mut count = vec![0usize; frontier.len()];
        let mut slot = vec![NONE; n];
        for i in 0..n {
            if node_of[i] != NONE {
                if let Some(s) = slot_of(node_of[i], &frontier) {
                    slot[i] = s;
                    sum[s] += targets[i];
                    count[s] += 1;
                }
            }
        }

        // best (gain, feature, threshold) per frontier slot
        let mut best: Vec<Option<(f64, usize, f64)>> = vec![None; frontier.len()];
        let mut left_sum = vec![0.0; frontier.len()];
        let mut left_count = vec![0usize; frontier.len()];
        let mut last = vec![0.0; frontier.len()];
        for (f, order) in data.sorted.iter().enumerate() {
            let col = &data.columns[f];
            left_sum.iter_mut().for_each(|v| *v = 0.0);
            left_count.iter_mut().for_each(|v| *v = 0);
            for &i in order {
                let i = i as usize;
                let s = slot[i];
                if s == NONE {
                    continue;
                }
                let v = col[i];
                let nl = left_count[s];
                if nl > 0 && v > last[s] {
                    let nr = count[s] - nl;
                    let (sl, st) = (left_sum[s], sum[s]);
                    let sr = st - sl;
                    let gain = sl * sl / nl as f64 + sr * sr / nr as f64 - st * st / count[s] as f64;
                    if gain > 1e-12 && best[s].is_none_or(|(g, _, _)| gain > g) {
                        best[s] = Some((gain, f, split_point(last[s], v)));
                    }
                }
                left_sum[s] += targets[i];
                left_count[s] += 1;
                last[s] = v;
            }
        }

        let mut next = Vec::new();
        let mut children = vec![(NONE, NONE); frontier.len()];
        for (s, &node) in frontier.iter().enumerate() {
            if count[s] < 2 {
                continue;
            }
            if let Some((_, feature, threshold)) = best[s] {
                let left = nodes.len();
                nodes.push(Node::Leaf(0.0));
                nodes.push(Node::Leaf(0.0));
                nodes[node] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right: left + 1,
                };
                children[s] = (left, left + 1);
                next.push(left);
                next.push(left + 1);
            }
        }
        if next.is_empty() {
            break;
        }
        for i in 0..n {
            let s = slot[i];
            if s == NONE {
                continue;
            }
            let (l, r) = children[s];
            if l == NONE {
                continue;
            }
            let Node::Split { feature, threshold, .. } = nodes[frontier[s]] else {
                unreachable!()
            };
            node_of[i] = if data.columns[feature][i] <= threshold { l } else { r };
        }
        frontier = next;
    }
    (Tree { nodes }, node_of)
}
