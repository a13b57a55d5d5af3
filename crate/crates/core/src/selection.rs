//! Greedy forward selection over the aggregate features, scored by the
//! validation macro-F1 of a small network.

use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::aggregate_feature_name;
use crate::classifiers::{train, Family, FfnnConfig, Hyperparams, LabeledSet};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, Provenance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    /// Feature indices (0-based) in the order they joined.
    pub ranking: Vec<usize>,
    /// Validation macro-F1 in percent after each addition.
    pub f1_curve: Vec<f64>,
    /// Probe models actually trained.
    pub models_trained: usize,
    pub seed: u64,
    pub n_features: usize,
}

/// `n (n + 1) / 2`, the number of probe models a full run trains.
pub fn full_run_models(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Starts from the empty set; each round trains one probe per remaining
/// feature on the selected set plus that feature and keeps the feature with
/// the best validation macro-F1 (ties to the lower index). The probe for
/// candidate `c` in round `r` (0-based) is seeded with `seed + r * n + c`,
/// so the outcome does not depend on scheduling. Stops after
/// `max_features` rounds when given.
pub fn additive_selection(
    train_set: &LabeledSet,
    val_set: &LabeledSet,
    probe: &FfnnConfig,
    seed: u64,
    max_features: Option<usize>,
) -> Result<SelectionTrace> {
    let n = train_set.feature_count();
    if n == 0 || train_set.is_empty() {
        return Err(Error::InsufficientData("feature selection needs training data".into()));
    }
    if val_set.feature_count() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: val_set.feature_count(),
        });
    }
    let rounds = max_features.unwrap_or(n).min(n);
    if rounds == 0 {
        return Err(Error::InvalidParameter("max features must be at least 1".into()));
    }
    let hyper = Hyperparams {
        ffnn: probe.clone(),
        ..Default::default()
    };
    let trained = AtomicUsize::new(0);
    let mut selected: Vec<usize> = Vec::with_capacity(rounds);
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut f1_curve = Vec::with_capacity(rounds);

    for round in 0..rounds {
        let scores = remaining
            .par_iter()
            .map(|&candidate| {
                let mut columns = selected.clone();
                columns.push(candidate);
                let model_seed = seed
                    .wrapping_add((round * n) as u64)
                    .wrapping_add(candidate as u64);
                let model = train(Family::Ffnn, &train_set.select_features(&columns)?, &hyper, model_seed)?;
                trained.fetch_add(1, Ordering::Relaxed);
                Ok(evaluate(&model, &val_set.select_features(&columns)?)?.macro_f1)
            })
            .collect::<Result<Vec<f64>>>()?;
        // `remaining` is ascending, so the first maximum is the lowest index.
        let best = (0..scores.len()).fold(0, |b, i| if scores[i] > scores[b] { i } else { b });
        log::debug!(
            "round {}: feature {} joins at F1 {:.2}",
            round + 1,
            remaining[best],
            scores[best]
        );
        selected.push(remaining.remove(best));
        f1_curve.push(scores[best]);
    }
    Ok(SelectionTrace {
        ranking: selected,
        f1_curve,
        models_trained: trained.into_inner(),
        seed,
        n_features: n,
    })
}

/// `rank,feature,name,cumulative_f1`, one row per selected feature. The
/// feature column is 1-based, matching the `f1..f136` cache columns.
pub fn write_selection_csv(path: &Path, trace: &SelectionTrace, provenance: &Provenance) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    writeln!(file, "{}", provenance.csv_comment()).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file);
    w.write_record(["rank", "feature", "name", "cumulative_f1"])?;
    for (rank, (&feature, f1)) in trace.ranking.iter().zip(&trace.f1_curve).enumerate() {
        let name = aggregate_feature_name(feature).unwrap_or_else(|| format!("feature_{}", feature + 1));
        w.write_record([
            (rank + 1).to_string(),
            (feature + 1).to_string(),
            name,
            format!("{f1:.4}"),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Contents of `selection_meta.json`. Wall-clock time is kept out of it so
/// repeated runs produce identical files; the CLI logs it instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionMeta {
    pub config_hash: String,
    pub seed: u64,
    pub probe: FfnnConfig,
    pub n_features: usize,
    pub rounds: usize,
    pub models_trained: usize,
    pub full_run_models: usize,
    pub train_clips: usize,
    pub val_clips: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Label is the sign pattern of feature `informative`; the rest is noise.
    fn planted(n: usize, d: usize, informative: usize, seed: u64) -> LabeledSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vectors = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let label = i % 2;
            let mut v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            v[informative] = if label == 0 { -2.0 } else { 2.0 } + rng.random_range(-0.3..0.3);
            vectors.push(v);
            labels.push(label);
        }
        LabeledSet::new(vectors, labels, 2).unwrap()
    }

    fn probe() -> FfnnConfig {
        FfnnConfig {
            hidden: 16,
            epochs: 20,
            learning_rate: 1e-2,
            ..Default::default()
        }
    }

    #[test]
    fn accounting_and_permutation() {
        let train_set = planted(40, 10, 3, 1);
        let val_set = planted(20, 10, 3, 2);
        let trace = additive_selection(&train_set, &val_set, &probe(), 7, None).unwrap();
        assert_eq!(trace.models_trained, 55);
        assert_eq!(full_run_models(136), 9316);
        let mut sorted = trace.ranking.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..10).collect::<Vec<_>>());
        assert!(trace.f1_curve.iter().all(|f| (0.0..=100.0).contains(f)));
        assert_eq!(trace.ranking[0], 3);
    }

    #[test]
    fn early_stop_and_reproducibility() {
        let train_set = planted(30, 6, 0, 3);
        let val_set = planted(12, 6, 0, 4);
        let a = additive_selection(&train_set, &val_set, &probe(), 1, Some(2)).unwrap();
        assert_eq!(a.ranking.len(), 2);
        assert_eq!(a.models_trained, 6 + 5);
        let b = additive_selection(&train_set, &val_set, &probe(), 1, Some(2)).unwrap();
        assert_eq!(a, b);
        assert!(additive_selection(&train_set, &val_set, &probe(), 1, Some(0)).is_err());
    }

    #[test]
    fn report_rows() {
        let trace = SelectionTrace {
            ranking: vec![7, 0],
            f1_curve: vec![50.0, 62.5],
            models_trained: 3,
            seed: 0,
            n_features: 2,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("selection.csv");
        let prov = Provenance {
            config_hash: "h".into(),
            seed: 0,
        };
        write_selection_csv(&path, &trace, &prov).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "rank,feature,name,cumulative_f1");
        assert_eq!(lines[2], "1,8,mean_spectral_rolloff,50.0000");
        assert_eq!(lines.len(), 4);
    }
}
