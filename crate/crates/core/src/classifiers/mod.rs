//! Six classifier families behind one train/predict contract.
//!
//! Every model z-scores its inputs with statistics fitted on its own
//! training data and stored inside the [`TrainedModel`], so a model can be
//! applied to raw clip vectors.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod boosting;
pub mod ffnn;
pub mod forest;
pub mod knn;
pub mod svm;
pub mod tree;

pub use boosting::GradientBoosting;
pub use ffnn::{FfnnConfig, Network};
pub use forest::{Forest, ForestKind};
pub use knn::Knn;
pub use svm::LinearSvm;

/// Feature vectors with integer class codes in `0..class_count`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    vectors: Vec<Vec<f64>>,
    labels: Vec<usize>,
    class_count: usize,
}

impl LabeledSet {
    pub fn new(vectors: Vec<Vec<f64>>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if vectors.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: vectors.len(),
                actual: labels.len(),
            });
        }
        if class_count < 2 {
            return Err(Error::InvalidParameter(format!("class count {class_count} < 2")));
        }
        if let Some(first) = vectors.first() {
            let d = first.len();
            if d == 0 {
                return Err(Error::InvalidParameter("feature vectors are empty".into()));
            }
            for v in &vectors {
                if v.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        actual: v.len(),
                    });
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidParameter("non-finite feature value".into()));
                }
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::InvalidParameter(format!(
                "label {bad} out of range for {class_count} classes"
            )));
        }
        Ok(LabeledSet {
            vectors,
            labels,
            class_count,
        })
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }

    /// Number of samples of each class.
    pub fn class_support(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Projection onto the given feature columns, in the given order.
    pub fn select_features(&self, columns: &[usize]) -> Result<LabeledSet> {
        let d = self.feature_count();
        if let Some(&bad) = columns.iter().find(|&&c| c >= d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: bad + 1,
            });
        }
        Ok(LabeledSet {
            vectors: self
                .vectors
                .iter()
                .map(|v| columns.iter().map(|&c| v[c]).collect())
                .collect(),
            labels: self.labels.clone(),
            class_count: self.class_count,
        })
    }

    /// Rows at `indices`, in order.
    pub fn subset(&self, indices: &[usize]) -> LabeledSet {
        LabeledSet {
            vectors: indices.iter().map(|&i| self.vectors[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_count: self.class_count,
        }
    }

    pub fn concat(&self, other: &LabeledSet) -> Result<LabeledSet> {
        if self.class_count != other.class_count {
            return Err(Error::InvalidParameter("class counts differ".into()));
        }
        if !self.is_empty() && !other.is_empty() && self.feature_count() != other.feature_count() {
            return Err(Error::DimensionMismatch {
                expected: self.feature_count(),
                actual: other.feature_count(),
            });
        }
        let mut out = self.clone();
        out.vectors.extend(other.vectors.iter().cloned());
        out.labels.extend_from_slice(&other.labels);
        Ok(out)
    }
}

/// Per-feature z-scoring. Constant features keep unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(vectors: &[Vec<f64>]) -> Standardizer {
        let d = vectors.first().map_or(0, Vec::len);
        let n = vectors.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for v in vectors {
            mean.iter_mut().zip(v).for_each(|(m, x)| *m += x);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for v in vectors {
            var.iter_mut()
                .zip(v.iter().zip(&mean))
                .for_each(|(s, (x, m))| *s += (x - m) * (x - m));
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn apply_all(&self, vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
        vectors.iter().map(|v| self.apply(v)).collect()
    }
}

/// Index of the largest score; ties resolve to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Knn,
    LinearSvm,
    RandomForest,
    ExtraTrees,
    GradientBoosting,
    Ffnn,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Knn,
        Family::LinearSvm,
        Family::RandomForest,
        Family::ExtraTrees,
        Family::GradientBoosting,
        Family::Ffnn,
    ];

    /// The families swept in the single- and multi-singer experiments; the
    /// network is reserved for feature selection there.
    pub const CLASSICAL: [Family; 5] = [
        Family::Knn,
        Family::LinearSvm,
        Family::RandomForest,
        Family::ExtraTrees,
        Family::GradientBoosting,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Knn => "knn",
            Family::LinearSvm => "svm",
            Family::RandomForest => "random_forest",
            Family::ExtraTrees => "extra_trees",
            Family::GradientBoosting => "gradient_boosting",
            Family::Ffnn => "ffnn",
        }
    }

    /// Name of the hyperparameter a sweep varies for this family.
    pub fn param_name(self) -> &'static str {
        match self {
            Family::Knn => "k",
            Family::LinearSvm => "c",
            Family::RandomForest | Family::ExtraTrees => "n_trees",
            Family::GradientBoosting => "n_stages",
            Family::Ffnn => "epochs",
        }
    }

    pub fn default_grid(self) -> Vec<f64> {
        match self {
            Family::Knn => vec![1.0, 3.0, 5.0, 7.0, 9.0, 11.0, 15.0, 21.0],
            Family::LinearSvm => vec![0.1, 0.5, 1.0, 5.0, 10.0],
            Family::RandomForest | Family::ExtraTrees | Family::GradientBoosting => vec![100.0, 200.0, 500.0],
            Family::Ffnn => vec![5.0, 20.0, 50.0],
        }
    }

    pub fn param_is_integer(self) -> bool {
        self != Family::LinearSvm
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Family::ALL
            .into_iter()
            .find(|f| f.name() == key)
            .or(match key.as_str() {
                "linear_svm" => Some(Family::LinearSvm),
                "rf" => Some(Family::RandomForest),
                "et" => Some(Family::ExtraTrees),
                "gbm" | "gb" => Some(Family::GradientBoosting),
                "nn" | "network" => Some(Family::Ffnn),
                _ => None,
            })
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown model family {s:?}; expected one of knn, svm, random_forest, extra_trees, gradient_boosting, ffnn"
                ))
            })
    }
}

/// Training constants of every family. Sweeps vary one field per family
/// (see [`Family::param_name`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub knn_k: usize,
    pub svm_c: f64,
    pub svm_max_epochs: usize,
    pub svm_tolerance: f64,
    pub n_trees: usize,
    pub n_stages: usize,
    pub gbm_learning_rate: f64,
    pub gbm_max_depth: usize,
    pub ffnn: FfnnConfig,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            knn_k: 5,
            svm_c: 1.0,
            svm_max_epochs: 1000,
            svm_tolerance: 1e-3,
            n_trees: 100,
            n_stages: 100,
            gbm_learning_rate: 0.1,
            gbm_max_depth: 3,
            ffnn: FfnnConfig::default(),
        }
    }
}

impl Hyperparams {
    /// Copy with the family's swept parameter set to `value`.
    pub fn with_value(&self, family: Family, value: f64) -> Result<Hyperparams> {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "{} = {value} must be positive",
                family.param_name()
            )));
        }
        if family.param_is_integer() && value.fract() != 0.0 {
            return Err(Error::InvalidParameter(format!(
                "{} = {value} must be a whole number",
                family.param_name()
            )));
        }
        let mut h = self.clone();
        let whole = value as usize;
        match family {
            Family::Knn => h.knn_k = whole,
            Family::LinearSvm => h.svm_c = value,
            Family::RandomForest | Family::ExtraTrees => h.n_trees = whole,
            Family::GradientBoosting => h.n_stages = whole,
            Family::Ffnn => h.ffnn.epochs = whole,
        }
        Ok(h)
    }

    pub fn value_of(&self, family: Family) -> f64 {
        match family {
            Family::Knn => self.knn_k as f64,
            Family::LinearSvm => self.svm_c,
            Family::RandomForest | Family::ExtraTrees => self.n_trees as f64,
            Family::GradientBoosting => self.n_stages as f64,
            Family::Ffnn => self.ffnn.epochs as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelParams {
    Knn(Knn),
    LinearSvm(LinearSvm),
    Forest(Forest),
    GradientBoosting(GradientBoosting),
    Ffnn(Network),
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// A fitted classifier of any family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub version: u32,
    pub family: Family,
    pub class_count: usize,
    pub feature_count: usize,
    pub seed: u64,
    pub hyperparams: Hyperparams,
    pub standardizer: Standardizer,
    pub params: ModelParams,
    /// Hash of the run configuration that produced the model, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

/// Trains `family` on `data`. Identical inputs give bit-identical models
/// regardless of the size of the rayon pool.
pub fn train(family: Family, data: &LabeledSet, hyper: &Hyperparams, seed: u64) -> Result<TrainedModel> {
    if data.is_empty() {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    let standardizer = Standardizer::fit(data.vectors());
    let x = standardizer.apply_all(data.vectors());
    let y = data.labels();
    let k = data.class_count();
    let params = match family {
        Family::Knn => ModelParams::Knn(Knn::fit(x, y.to_vec(), k, hyper.knn_k)?),
        Family::LinearSvm => ModelParams::LinearSvm(LinearSvm::fit(
            &x,
            y,
            k,
            hyper.svm_c,
            hyper.svm_max_epochs,
            hyper.svm_tolerance,
            seed,
        )?),
        Family::RandomForest => {
            ModelParams::Forest(Forest::fit(ForestKind::RandomForest, &x, y, k, hyper.n_trees, seed)?)
        }
        Family::ExtraTrees => {
            ModelParams::Forest(Forest::fit(ForestKind::ExtraTrees, &x, y, k, hyper.n_trees, seed)?)
        }
        Family::GradientBoosting => ModelParams::GradientBoosting(GradientBoosting::fit(
            &x,
            y,
            k,
            hyper.n_stages,
            hyper.gbm_learning_rate,
            hyper.gbm_max_depth,
        )?),
        Family::Ffnn => ModelParams::Ffnn(Network::train(&x, y, k, &hyper.ffnn, seed)?),
    };
    Ok(TrainedModel {
        version: MODEL_FORMAT_VERSION,
        family,
        class_count: k,
        feature_count: data.feature_count(),
        seed,
        hyperparams: hyper.clone(),
        standardizer,
        params,
        config_hash: None,
    })
}

pub fn train_knn(data: &LabeledSet, k: usize) -> Result<TrainedModel> {
    train(Family::Knn, data, &Hyperparams { knn_k: k, ..Default::default() }, 0)
}

pub fn train_linear_svm(data: &LabeledSet, c: f64, seed: u64) -> Result<TrainedModel> {
    train(Family::LinearSvm, data, &Hyperparams { svm_c: c, ..Default::default() }, seed)
}

pub fn train_random_forest(data: &LabeledSet, n_trees: usize, seed: u64) -> Result<TrainedModel> {
    train(Family::RandomForest, data, &Hyperparams { n_trees, ..Default::default() }, seed)
}

pub fn train_extra_trees(data: &LabeledSet, n_trees: usize, seed: u64) -> Result<TrainedModel> {
    train(Family::ExtraTrees, data, &Hyperparams { n_trees, ..Default::default() }, seed)
}

pub fn train_gradient_boosting(data: &LabeledSet, n_stages: usize) -> Result<TrainedModel> {
    train(Family::GradientBoosting, data, &Hyperparams { n_stages, ..Default::default() }, 0)
}

pub fn train_ffnn(data: &LabeledSet, config: &FfnnConfig, seed: u64) -> Result<TrainedModel> {
    train(Family::Ffnn, data, &Hyperparams { ffnn: config.clone(), ..Default::default() }, seed)
}

impl TrainedModel {
    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.feature_count {
            return Err(Error::DimensionMismatch {
                expected: self.feature_count,
                actual: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite input feature".into()));
        }
        Ok(())
    }

    /// Per-class scores: decision values for SVM, boosting and network
    /// logits, vote counts for the tree ensembles and neighbors.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let z = self.standardizer.apply(x);
        Ok(match &self.params {
            ModelParams::Knn(m) => m.votes(&z),
            ModelParams::LinearSvm(m) => m.scores(&z),
            ModelParams::Forest(m) => m.votes(&z),
            ModelParams::GradientBoosting(m) => m.scores(&z),
            ModelParams::Ffnn(m) => m.logits(&z),
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        self.check_input(x)?;
        let z = self.standardizer.apply(x);
        Ok(match &self.params {
            ModelParams::Knn(m) => m.predict(&z),
            ModelParams::LinearSvm(m) => argmax(&m.scores(&z)),
            ModelParams::Forest(m) => argmax(&m.votes(&z)),
            ModelParams::GradientBoosting(m) => argmax(&m.scores(&z)),
            ModelParams::Ffnn(m) => argmax(&m.logits(&z)),
        })
    }

    pub fn predict_all(&self, vectors: &[Vec<f64>]) -> Result<Vec<usize>> {
        vectors.iter().map(|v| self.predict(v)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Parses a model, rejecting unknown format versions and, when given, a
    /// feature count other than `expected_features`.
    pub fn from_json(text: &str, expected_features: Option<usize>) -> Result<TrainedModel> {
        let model: TrainedModel = serde_json::from_str(text)?;
        if model.version != MODEL_FORMAT_VERSION {
            return Err(Error::Model(format!(
                "format version {} (supported: {MODEL_FORMAT_VERSION})",
                model.version
            )));
        }
        if model.standardizer.mean.len() != model.feature_count || model.standardizer.std.len() != model.feature_count {
            return Err(Error::Model("standardization vectors disagree with feature_count".into()));
        }
        if let Some(expected) = expected_features {
            if expected != model.feature_count {
                return Err(Error::Model(format!(
                    "model expects {} features, caller provides {expected}",
                    model.feature_count
                )));
            }
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>, expected_features: Option<usize>) -> Result<TrainedModel> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, expected_features)
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labeled_set_validation() {
        assert!(LabeledSet::new(vec![vec![1.0]], vec![2], 2).is_err());
        assert!(LabeledSet::new(vec![vec![1.0], vec![1.0, 2.0]], vec![0, 1], 2).is_err());
        assert!(LabeledSet::new(vec![vec![f64::NAN]], vec![0], 2).is_err());
        assert!(LabeledSet::new(vec![vec![1.0]], vec![0, 1], 2).is_err());
        let s = LabeledSet::new(vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]], vec![0, 1], 2).unwrap();
        let p = s.select_features(&[2, 0]).unwrap();
        assert_eq!(p.vectors()[1], vec![6.0, 4.0]);
        assert!(s.select_features(&[3]).is_err());
    }

    #[test]
    fn standardizer() {
        let st = Standardizer::fit(&[vec![1.0, 5.0], vec![3.0, 5.0]]);
        assert_eq!(st.mean, vec![2.0, 5.0]);
        assert_eq!(st.std, vec![1.0, 1.0]);
        assert_eq!(st.apply(&[3.0, 6.0]), vec![1.0, 1.0]);
    }

    #[test]
    fn argmax_ties_low() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[2.0, 2.0]), 0);
    }

    #[test]
    fn family_names_round_trip() {
        for f in Family::ALL {
            assert_eq!(f.name().parse::<Family>().unwrap(), f);
            for v in f.default_grid() {
                let h = Hyperparams::default().with_value(f, v).unwrap();
                assert_eq!(h.value_of(f), v);
            }
        }
        assert!("boosted".parse::<Family>().is_err());
        assert!(Hyperparams::default().with_value(Family::Knn, 2.5).is_err());
        assert!(Hyperparams::default().with_value(Family::LinearSvm, 0.0).is_err());
    }

    #[test]
    fn persistence_round_trip_and_mismatch() {
        let data = testdata::blobs(&[vec![0.0, 0.0], vec![5.0, 5.0], vec![0.0, 5.0]], 20, 1);
        for family in Family::ALL {
            let hyper = Hyperparams {
                n_trees: 5,
                n_stages: 5,
                ..Default::default()
            };
            let model = train(family, &data, &hyper, 9).unwrap();
            let json = model.to_json().unwrap();
            let back = TrainedModel::from_json(&json, Some(2)).unwrap();
            assert_eq!(back.to_json().unwrap(), json);
            for v in data.vectors() {
                assert_eq!(back.predict(v).unwrap(), model.predict(v).unwrap());
            }
            assert!(TrainedModel::from_json(&json, Some(136)).is_err(), "{family}");
            assert!(model.predict(&[1.0]).is_err());
        }
    }
}
