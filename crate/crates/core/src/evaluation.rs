//! Splits, metrics, hyperparameter sweeps and their report files.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::ClipFeatureVector;
use crate::classifiers::{train, Family, Hyperparams, LabeledSet, TrainedModel};
use crate::error::{Error, Result};
use crate::taxonomy::{parse_label, quadrant_of, EmotionLabel, Quadrant};

/// Which label set a run classifies into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Emotions20,
    Big4,
    Pair(EmotionLabel, EmotionLabel),
}

impl Task {
    pub fn class_count(self) -> usize {
        match self {
            Task::Emotions20 => EmotionLabel::COUNT,
            Task::Big4 => Quadrant::COUNT,
            Task::Pair(..) => 2,
        }
    }

    pub fn class_names(self) -> Vec<String> {
        match self {
            Task::Emotions20 => EmotionLabel::ALL.iter().map(|e| e.name().to_string()).collect(),
            Task::Big4 => Quadrant::ALL.iter().map(|q| q.name().to_string()).collect(),
            Task::Pair(a, b) => vec![a.name().to_string(), b.name().to_string()],
        }
    }

    /// Class code of `label` under this task, or `None` when a pair task
    /// excludes it.
    pub fn code_of(self, label: EmotionLabel) -> Option<usize> {
        match self {
            Task::Emotions20 => Some(label.code()),
            Task::Big4 => Some(quadrant_of(label).code()),
            Task::Pair(a, _) if label == a => Some(0),
            Task::Pair(_, b) if label == b => Some(1),
            Task::Pair(..) => None,
        }
    }

    /// Clips this task keeps, in input order.
    pub fn filter(self, clips: &[ClipFeatureVector]) -> Vec<ClipFeatureVector> {
        clips
            .iter()
            .filter(|c| c.label.and_then(|l| self.code_of(l)).is_some())
            .cloned()
            .collect()
    }

    pub fn labeled_set(self, clips: &[ClipFeatureVector]) -> Result<LabeledSet> {
        let mut vectors = Vec::with_capacity(clips.len());
        let mut labels = Vec::with_capacity(clips.len());
        for clip in clips {
            let label = clip
                .label
                .ok_or_else(|| Error::InvalidParameter("clip vector without a label".into()))?;
            let code = self
                .code_of(label)
                .ok_or_else(|| Error::InvalidParameter(format!("{label} is not part of task {self}")))?;
            vectors.push(clip.values.clone());
            labels.push(code);
        }
        LabeledSet::new(vectors, labels, self.class_count())
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Task::Emotions20 => f.write_str("emotions20"),
            Task::Big4 => f.write_str("big4"),
            Task::Pair(a, b) => write!(f, "pair:{a}:{b}"),
        }
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.to_ascii_lowercase().as_str() {
            "emotions20" => return Ok(Task::Emotions20),
            "big4" => return Ok(Task::Big4),
            _ => {}
        }
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() == 3 && parts[0].eq_ignore_ascii_case("pair") {
            let (a, b) = (parse_label(parts[1])?, parse_label(parts[2])?);
            if a == b {
                return Err(Error::InvalidParameter(format!("pair task needs two distinct emotions, got {a} twice")));
            }
            return Ok(Task::Pair(a, b));
        }
        Err(Error::InvalidParameter(format!(
            "unknown taxonomy {s:?}; expected emotions20, big4 or pair:<emotion>:<emotion>"
        )))
    }
}

/// Two-class subset of a 20-emotion set holding `e1` (code 0) and `e2`
/// (code 1).
pub fn pairwise_task(data: &LabeledSet, e1: EmotionLabel, e2: EmotionLabel) -> Result<LabeledSet> {
    if data.class_count() != EmotionLabel::COUNT {
        return Err(Error::InvalidParameter(format!(
            "pairwise task needs 20-emotion data, got {} classes",
            data.class_count()
        )));
    }
    if e1 == e2 {
        return Err(Error::InvalidParameter("pairwise task needs two distinct emotions".into()));
    }
    let support = data.class_support();
    for e in [e1, e2] {
        if support[e.code()] == 0 {
            return Err(Error::InsufficientData(format!("no clips labeled {e}")));
        }
    }
    let keep: Vec<usize> = (0..data.len())
        .filter(|&i| [e1.code(), e2.code()].contains(&data.labels()[i]))
        .collect();
    let subset = data.subset(&keep);
    let labels = subset.labels().iter().map(|&l| usize::from(l == e2.code())).collect();
    LabeledSet::new(subset.vectors().to_vec(), labels, 2)
}

/// Relabels a 20-emotion set by quadrant.
pub fn quadrant_task(data: &LabeledSet) -> Result<LabeledSet> {
    if data.class_count() != EmotionLabel::COUNT {
        return Err(Error::InvalidParameter(format!(
            "quadrant task needs 20-emotion data, got {} classes",
            data.class_count()
        )));
    }
    let labels = data
        .labels()
        .iter()
        .map(|&l| quadrant_of(EmotionLabel::from_code(l).expect("validated code")).code())
        .collect();
    LabeledSet::new(data.vectors().to_vec(), labels, Quadrant::COUNT)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
    /// Stratify by (emotion, singer) instead of emotion alone when the
    /// data holds more than one singer.
    pub stratify_by_singer: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train: 0.70,
            val: 0.15,
            test: 0.15,
            seed: 0,
            stratify_by_singer: true,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let f = [self.train, self.val, self.test];
        if f.iter().any(|&x| x.is_nan() || x <= 0.0) || ((f.iter().sum::<f64>()) - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "split fractions {:?} must be positive and sum to 1",
                f
            )));
        }
        Ok(())
    }
}

/// Largest-remainder apportionment of `n` items over `fractions`, then
/// moving single items from the largest part into any empty one. Ties in
/// remainders go to the earlier part.
pub fn allocate(n: usize, fractions: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor())).then(a.cmp(&b)));
    let assigned: usize = counts.iter().sum();
    for &i in order.iter().cycle().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    if n >= fractions.len() {
        while let Some(empty) = counts.iter().position(|&c| c == 0) {
            let largest = (0..counts.len()).fold(0, |best, i| if counts[i] > counts[best] { i } else { best });
            counts[largest] -= 1;
            counts[empty] += 1;
        }
    }
    counts
}

/// Indices of the train, validation and test partitions, each ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

fn strata(clips: &[ClipFeatureVector], by_singer: bool) -> Result<BTreeMap<(usize, String), Vec<usize>>> {
    let mut groups: BTreeMap<(usize, String), Vec<usize>> = BTreeMap::new();
    for (i, clip) in clips.iter().enumerate() {
        let label = clip
            .label
            .ok_or_else(|| Error::InvalidParameter("cannot stratify an unlabeled clip".into()))?;
        let singer = if by_singer { clip.singer_id.clone().unwrap_or_default() } else { String::new() };
        groups.entry((label.code(), singer)).or_default().push(i);
    }
    Ok(groups)
}

fn split_groups(
    groups: BTreeMap<(usize, String), Vec<usize>>,
    fractions: &[f64],
    seed: u64,
) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts = vec![Vec::new(); fractions.len()];
    for (_, mut members) in groups {
        members.shuffle(&mut rng);
        let counts = allocate(members.len(), fractions);
        let mut rest = members.as_slice();
        for (part, &c) in parts.iter_mut().zip(&counts) {
            let (take, tail) = rest.split_at(c);
            part.extend_from_slice(take);
            rest = tail;
        }
    }
    parts.iter_mut().for_each(|p| p.sort_unstable());
    parts
}

/// Seeded split stratified by emotion, and by singer as well when the spec
/// asks for it, the clips come from several singers, and every
/// (emotion, singer) group can fill all three partitions.
pub fn split_indices(clips: &[ClipFeatureVector], spec: &SplitSpec) -> Result<SplitIndices> {
    spec.validate()?;
    let by_label = strata(clips, false)?;
    if let Some(((code, _), members)) = by_label.iter().find(|(_, m)| m.len() < 3) {
        return Err(Error::InsufficientData(format!(
            "{} has {} clips; every class needs at least 3 to fill train, validation and test",
            EmotionLabel::from_code(*code).map_or("?", EmotionLabel::name),
            members.len()
        )));
    }
    let singers: std::collections::BTreeSet<_> = clips.iter().map(|c| c.singer_id.as_deref()).collect();
    let mut groups = by_label;
    if spec.stratify_by_singer && singers.len() > 1 {
        let fine = strata(clips, true)?;
        if fine.values().all(|m| m.len() >= 3) {
            groups = fine;
        } else {
            log::warn!("some emotion/singer groups have fewer than 3 clips; stratifying by emotion only");
        }
    }
    let mut parts = split_groups(groups, &[spec.train, spec.val, spec.test], spec.seed).into_iter();
    Ok(SplitIndices {
        train: parts.next().unwrap_or_default(),
        val: parts.next().unwrap_or_default(),
        test: parts.next().unwrap_or_default(),
    })
}

pub type Partitions = (Vec<ClipFeatureVector>, Vec<ClipFeatureVector>, Vec<ClipFeatureVector>);

fn pick(clips: &[ClipFeatureVector], idx: &[usize]) -> Vec<ClipFeatureVector> {
    idx.iter().map(|&i| clips[i].clone()).collect()
}

pub fn stratified_split(clips: &[ClipFeatureVector], spec: &SplitSpec) -> Result<Partitions> {
    let s = split_indices(clips, spec)?;
    Ok((pick(clips, &s.train), pick(clips, &s.val), pick(clips, &s.test)))
}

/// Tests on every clip of `test_singer`; the other singers' clips are split
/// into train and validation in the spec's train:val ratio, stratified by
/// emotion.
pub fn singer_holdout(clips: &[ClipFeatureVector], test_singer: &str, spec: &SplitSpec) -> Result<Partitions> {
    spec.validate()?;
    let (test, rest): (Vec<_>, Vec<_>) = clips
        .iter()
        .cloned()
        .partition(|c| c.singer_id.as_deref() == Some(test_singer));
    if test.is_empty() {
        return Err(Error::InsufficientData(format!("no clips from singer {test_singer:?}")));
    }
    if rest.is_empty() {
        return Err(Error::InsufficientData(format!("only singer {test_singer:?} is present")));
    }
    let groups = strata(&rest, false)?;
    if let Some(((code, _), m)) = groups.iter().find(|(_, m)| m.len() < 2) {
        return Err(Error::InsufficientData(format!(
            "{} has {} clips outside the held-out singer; at least 2 are needed",
            EmotionLabel::from_code(*code).map_or("?", EmotionLabel::name),
            m.len()
        )));
    }
    let total = spec.train + spec.val;
    let parts = split_groups(groups, &[spec.train / total, spec.val / total], spec.seed);
    Ok((pick(&rest, &parts[0]), pick(&rest, &parts[1]), test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Classification scores in percent. `confusion[t][p]` counts samples of
/// true class `t` predicted as `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: Vec<Vec<usize>>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn class_metrics(tp: usize, predicted: usize, support: usize) -> ClassMetrics {
    let precision = ratio(tp, predicted);
    let recall = ratio(tp, support);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    ClassMetrics {
        precision: 100.0 * precision,
        recall: 100.0 * recall,
        f1: 100.0 * f1,
        support,
    }
}

fn summarize(per_class: Vec<ClassMetrics>, correct: usize, total: usize, confusion: Vec<Vec<usize>>) -> Metrics {
    let macro_f1 = per_class.iter().map(|c| c.f1).sum::<f64>() / per_class.len() as f64;
    Metrics {
        accuracy: 100.0 * ratio(correct, total),
        macro_f1,
        per_class,
        confusion,
    }
}

impl Metrics {
    pub fn from_confusion(confusion: Vec<Vec<usize>>) -> Result<Metrics> {
        let k = confusion.len();
        if k == 0 || confusion.iter().any(|row| row.len() != k) {
            return Err(Error::InvalidParameter("confusion matrix must be square and non-empty".into()));
        }
        let total: usize = confusion.iter().flatten().sum();
        if total == 0 {
            return Err(Error::InsufficientData("no predictions to score".into()));
        }
        let per_class = (0..k)
            .map(|c| {
                let predicted = (0..k).map(|t| confusion[t][c]).sum();
                class_metrics(confusion[c][c], predicted, confusion[c].iter().sum())
            })
            .collect();
        let correct = (0..k).map(|c| confusion[c][c]).sum();
        Ok(summarize(per_class, correct, total, confusion))
    }

    /// Same result as [`Metrics::from_confusion`], accumulated from running
    /// per-class counters instead of reading the matrix back.
    pub fn from_predictions(truth: &[usize], predicted: &[usize], class_count: usize) -> Result<Metrics> {
        if truth.len() != predicted.len() {
            return Err(Error::DimensionMismatch {
                expected: truth.len(),
                actual: predicted.len(),
            });
        }
        if truth.is_empty() {
            return Err(Error::InsufficientData("no predictions to score".into()));
        }
        let mut confusion = vec![vec![0; class_count]; class_count];
        let (mut tp, mut pred_count, mut support) = (vec![0; class_count], vec![0; class_count], vec![0; class_count]);
        let mut correct = 0;
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= class_count || p >= class_count {
                return Err(Error::InvalidParameter(format!("class code out of range for {class_count} classes")));
            }
            confusion[t][p] += 1;
            support[t] += 1;
            pred_count[p] += 1;
            if t == p {
                tp[t] += 1;
                correct += 1;
            }
        }
        let per_class = (0..class_count)
            .map(|c| class_metrics(tp[c], pred_count[c], support[c]))
            .collect();
        Ok(summarize(per_class, correct, truth.len(), confusion))
    }
}

pub fn evaluate(model: &TrainedModel, test: &LabeledSet) -> Result<Metrics> {
    if test.is_empty() {
        return Err(Error::InsufficientData("empty test set".into()));
    }
    if model.class_count != test.class_count() {
        return Err(Error::DimensionMismatch {
            expected: model.class_count,
            actual: test.class_count(),
        });
    }
    let predicted = model.predict_all(test.vectors())?;
    Metrics::from_predictions(test.labels(), &predicted, test.class_count())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub value: f64,
    pub val: Metrics,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub family: Family,
    pub points: Vec<GridPoint>,
    pub best_value: f64,
    pub best_hyperparams: Hyperparams,
    /// Test metrics of the best setting refit on train + validation.
    pub test: Metrics,
    pub model: TrainedModel,
}

impl SweepResult {
    pub fn best_val(&self) -> &Metrics {
        &self
            .points
            .iter()
            .find(|p| p.value == self.best_value)
            .expect("best value comes from the grid")
            .val
    }
}

/// Trains one model per grid value on `train` and scores it on `val`. The
/// value with the highest validation macro-F1 (ties to the smaller value)
/// is refit on train + validation and scored once on `test`. Every model
/// uses `seed`. KNN grid values above the training-set size are skipped.
pub fn sweep(
    family: Family,
    grid: &[f64],
    base: &Hyperparams,
    train_set: &LabeledSet,
    val_set: &LabeledSet,
    test_set: &LabeledSet,
    seed: u64,
) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter(format!("empty grid for {family}")));
    }
    let mut values = grid.to_vec();
    values.sort_by(f64::total_cmp);
    values.dedup();
    if family == Family::Knn {
        let n = train_set.len() as f64;
        let (kept, dropped): (Vec<f64>, Vec<f64>) = values.into_iter().partition(|&k| k <= n);
        if !dropped.is_empty() {
            log::warn!("knn: skipping k = {dropped:?}, only {n} training clips");
        }
        if kept.is_empty() {
            return Err(Error::InsufficientData(format!(
                "every k in the grid exceeds the {n} training clips"
            )));
        }
        values = kept;
    }
    let points = values
        .par_iter()
        .map(|&value| {
            let hyper = base.with_value(family, value)?;
            let model = train(family, train_set, &hyper, seed)?;
            Ok(GridPoint {
                value,
                val: evaluate(&model, val_set)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = points.iter().fold(&points[0], |best, p| if p.val.macro_f1 > best.val.macro_f1 { p } else { best });
    let best_value = best.value;
    let best_hyperparams = base.with_value(family, best_value)?;
    let model = train(family, &train_set.concat(val_set)?, &best_hyperparams, seed)?;
    let test = evaluate(&model, test_set)?;
    Ok(SweepResult {
        family,
        points,
        best_value,
        best_hyperparams,
        test,
        model,
    })
}

pub fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

/// Config hash and seed stamped on every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn csv_comment(&self) -> String {
        format!("# config_hash={} seed={}", self.config_hash, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyReport {
    pub family: Family,
    pub param: String,
    pub best_value: f64,
    pub hyperparams: Hyperparams,
    pub val_accuracy: f64,
    pub val_macro_f1: f64,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassRow>,
}

impl FamilyReport {
    pub fn new(result: &SweepResult, class_names: &[String]) -> FamilyReport {
        let val = result.best_val();
        FamilyReport {
            family: result.family,
            param: result.family.param_name().to_string(),
            best_value: result.best_value,
            hyperparams: result.best_hyperparams.clone(),
            val_accuracy: round1(val.accuracy),
            val_macro_f1: round1(val.macro_f1),
            accuracy: round1(result.test.accuracy),
            macro_f1: round1(result.test.macro_f1),
            per_class: result
                .test
                .per_class
                .iter()
                .zip(class_names)
                .map(|(m, name)| ClassRow {
                    class: name.clone(),
                    precision: round1(m.precision),
                    recall: round1(m.recall),
                    f1: round1(m.f1),
                    support: m.support,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

/// Contents of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config_hash: String,
    pub seed: u64,
    pub taxonomy: String,
    pub singers: Vec<String>,
    pub holdout_singer: Option<String>,
    pub classes: Vec<String>,
    pub split: SplitSpec,
    pub split_sizes: SplitSizes,
    pub results: Vec<FamilyReport>,
}

impl MetricsReport {
    /// Family with the highest validation macro-F1; ties go to the earlier
    /// entry.
    pub fn best_index(&self) -> Option<usize> {
        (0..self.results.len()).reduce(|best, i| {
            if self.results[i].val_macro_f1 > self.results[best].val_macro_f1 {
                i
            } else {
                best
            }
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<MetricsReport> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn csv_writer(path: &Path, provenance: &Provenance) -> Result<csv::Writer<std::fs::File>> {
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    writeln!(file, "{}", provenance.csv_comment()).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

/// Rows are true classes, columns predicted classes.
pub fn write_confusion_csv(path: &Path, confusion: &[Vec<usize>], class_names: &[String], provenance: &Provenance) -> Result<()> {
    let mut w = csv_writer(path, provenance)?;
    let mut header = vec!["true\\predicted".to_string()];
    header.extend(class_names.iter().cloned());
    w.write_record(&header)?;
    for (name, row) in class_names.iter().zip(confusion) {
        let mut record = vec![name.clone()];
        record.extend(row.iter().map(usize::to_string));
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn format_param_value(family: Family, value: f64) -> String {
    if family.param_is_integer() {
        format!("{}", value as u64)
    } else {
        format!("{value}")
    }
}

/// One row per grid point of every sweep.
pub fn write_sweep_csv(path: &Path, sweeps: &[SweepResult], provenance: &Provenance) -> Result<()> {
    let mut w = csv_writer(path, provenance)?;
    w.write_record(["family", "param", "val_accuracy", "val_f1"])?;
    for s in sweeps {
        for p in &s.points {
            w.write_record([
                s.family.name().to_string(),
                format!("{}={}", s.family.param_name(), format_param_value(s.family, p.value)),
                format!("{:.1}", p.val.accuracy),
                format!("{:.1}", p.val.macro_f1),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Aligned text tables: one row per family, then per-class scores of the
/// best family.
pub fn format_report(report: &MetricsReport) -> String {
    let mut out = String::new();
    let singers = if report.singers.is_empty() { "all".to_string() } else { report.singers.join(",") };
    out.push_str(&format!(
        "taxonomy {}  singers {}  seed {}  config {}\n",
        report.taxonomy, singers, report.seed, report.config_hash
    ));
    if let Some(h) = &report.holdout_singer {
        out.push_str(&format!("held-out singer {h}\n"));
    }
    out.push_str(&format!(
        "train {}  val {}  test {}\n\n",
        report.split_sizes.train, report.split_sizes.val, report.split_sizes.test
    ));
    out.push_str(&format!("{:<18} {:>8} {:>6}  {}\n", "Model", "Accuracy", "F1", "Hyperparam"));
    for r in &report.results {
        out.push_str(&format!(
            "{:<18} {:>8.1} {:>6.1}  {}={}\n",
            r.family.name(),
            r.accuracy,
            r.macro_f1,
            r.param,
            format_param_value(r.family, r.best_value)
        ));
    }
    if let Some(best) = report.best_index().map(|i| &report.results[i]) {
        out.push_str(&format!("\nper class, {}\n", best.family.name()));
        let width = best.per_class.iter().map(|c| c.class.len()).max().unwrap_or(5).max(5);
        out.push_str(&format!(
            "{:<width$} {:>9} {:>6} {:>6} {:>7}\n",
            "Class", "Precision", "Recall", "F1", "Support"
        ));
        for c in &best.per_class {
            out.push_str(&format!(
                "{:<width$} {:>9.1} {:>6.1} {:>6.1} {:>7}\n",
                c.class, c.precision, c.recall, c.f1, c.support
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::testdata::blobs;

    fn clip(label: EmotionLabel, singer: &str, i: usize) -> ClipFeatureVector {
        ClipFeatureVector {
            values: vec![i as f64, label.code() as f64],
            label: Some(label),
            singer_id: Some(singer.to_string()),
            clip_path: Some(format!("{singer}/{label}/{i}.wav")),
        }
    }

    fn corpus(per_class: usize, singers: &[&str]) -> Vec<ClipFeatureVector> {
        let mut out = Vec::new();
        for e in EmotionLabel::ALL {
            for s in singers {
                for i in 0..per_class {
                    out.push(clip(e, s, out.len() + i));
                }
            }
        }
        out
    }

    #[test]
    fn allocation() {
        assert_eq!(allocate(10, &[0.7, 0.15, 0.15]), vec![7, 2, 1]);
        assert_eq!(allocate(3, &[0.7, 0.15, 0.15]), vec![1, 1, 1]);
        assert_eq!(allocate(20, &[0.7, 0.15, 0.15]), vec![14, 3, 3]);
        for n in 3..200 {
            let c = allocate(n, &[0.7, 0.15, 0.15]);
            assert_eq!(c.iter().sum::<usize>(), n);
            assert!(c.iter().all(|&x| x >= 1));
        }
    }

    #[test]
    fn split_is_exhaustive_disjoint_and_stratified() {
        let clips = corpus(10, &["a"]);
        let spec = SplitSpec { seed: 5, ..Default::default() };
        let s = split_indices(&clips, &spec).unwrap();
        assert_eq!(s.train.len() + s.val.len() + s.test.len(), 200);
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..200).collect::<Vec<_>>());
        for e in EmotionLabel::ALL {
            let count = |idx: &[usize]| idx.iter().filter(|&&i| clips[i].label == Some(e)).count();
            let parts = (count(&s.train), count(&s.val), count(&s.test));
            assert!(parts == (7, 2, 1) || parts == (7, 1, 2), "{e}: {parts:?}");
        }
        assert_eq!(split_indices(&clips, &spec).unwrap(), s);
        assert_ne!(split_indices(&clips, &SplitSpec { seed: 6, ..spec }).unwrap(), s);
    }

    #[test]
    fn split_by_singer() {
        let clips = corpus(4, &["a", "b", "c"]);
        let s = split_indices(&clips, &SplitSpec::default()).unwrap();
        for singer in ["a", "b", "c"] {
            for part in [&s.train, &s.val, &s.test] {
                assert!(part.iter().any(|&i| clips[i].singer_id.as_deref() == Some(singer)));
            }
        }
    }

    #[test]
    fn split_rejects_small_classes_and_bad_fractions() {
        let mut clips = corpus(3, &["a"]);
        clips.pop();
        assert!(matches!(split_indices(&clips, &SplitSpec::default()), Err(Error::InsufficientData(_))));
        let bad = SplitSpec { train: 0.8, ..Default::default() };
        assert!(split_indices(&corpus(3, &["a"]), &bad).is_err());
    }

    #[test]
    fn holdout_keeps_singer_out_of_training() {
        let clips = corpus(4, &["a", "b", "c"]);
        let (train_p, val_p, test_p) = singer_holdout(&clips, "c", &SplitSpec::default()).unwrap();
        assert!(test_p.iter().all(|c| c.singer_id.as_deref() == Some("c")));
        assert!(train_p.iter().chain(&val_p).all(|c| c.singer_id.as_deref() != Some("c")));
        assert_eq!(train_p.len() + val_p.len(), 160);
        assert!(singer_holdout(&clips, "zz", &SplitSpec::default()).is_err());
    }

    #[test]
    fn confusion_example() {
        let m = Metrics::from_confusion(vec![vec![5, 0, 0], vec![0, 4, 1], vec![0, 2, 3]]).unwrap();
        assert!((m.accuracy - 80.0).abs() < 1e-12);
        // Per-class F1 by hand: 1, 8/11, 2/3.
        let oracle = 100.0 * (1.0 + 8.0 / 11.0 + 2.0 / 3.0) / 3.0;
        assert!((m.macro_f1 - oracle).abs() < 1e-9);
        assert_eq!(round1(m.macro_f1), 79.8);
    }

    #[test]
    fn two_paths_agree() {
        let truth = [0, 0, 1, 1, 2, 2, 2, 3, 0, 1];
        let pred = [0, 1, 1, 1, 2, 0, 2, 2, 0, 3];
        let streamed = Metrics::from_predictions(&truth, &pred, 4).unwrap();
        let from_matrix = Metrics::from_confusion(streamed.confusion.clone()).unwrap();
        assert_eq!(streamed, from_matrix);
        for (row, c) in streamed.confusion.iter().zip(&streamed.per_class) {
            assert_eq!(row.iter().sum::<usize>(), c.support);
        }
    }

    #[test]
    fn trivial_predictors() {
        let truth: Vec<usize> = (0..40).map(|i| i % 4).collect();
        let perfect = Metrics::from_predictions(&truth, &truth, 4).unwrap();
        assert_eq!((perfect.accuracy, perfect.macro_f1), (100.0, 100.0));
        let constant = Metrics::from_predictions(&truth, &[2; 40], 4).unwrap();
        assert_eq!(constant.accuracy, 25.0);
        assert_eq!(constant.per_class[0].f1, 0.0);
        assert!(Metrics::from_predictions(&[], &[], 4).is_err());
    }

    #[test]
    fn tasks() {
        assert_eq!("big4".parse::<Task>().unwrap(), Task::Big4);
        assert_eq!(
            "pair:love:Disgust".parse::<Task>().unwrap(),
            Task::Pair(EmotionLabel::Love, EmotionLabel::Disgust)
        );
        assert!("pair:Love:Love".parse::<Task>().is_err());
        assert!("pair:Love".parse::<Task>().is_err());
        let t = Task::Pair(EmotionLabel::Love, EmotionLabel::Disgust);
        assert_eq!(t.to_string(), "pair:Love:Disgust");
        assert_eq!(t.code_of(EmotionLabel::Anger), None);
        assert_eq!(Task::Big4.code_of(EmotionLabel::Anger), Task::Big4.code_of(EmotionLabel::Hate));
    }

    #[test]
    fn pairwise_and_quadrant_tasks() {
        let clips = corpus(3, &["a"]);
        let set = Task::Emotions20.labeled_set(&clips).unwrap();
        let pair = pairwise_task(&set, EmotionLabel::Love, EmotionLabel::Disgust).unwrap();
        assert_eq!(pair.class_count(), 2);
        assert_eq!(pair.class_support(), vec![3, 3]);
        let quads = quadrant_task(&set).unwrap();
        assert_eq!(quads.class_support(), vec![15; 4]);
        assert!(quadrant_task(&quads).is_err());
        let without_love = set.subset(
            &(0..set.len())
                .filter(|&i| set.labels()[i] != EmotionLabel::Love.code())
                .collect::<Vec<_>>(),
        );
        assert!(pairwise_task(&without_love, EmotionLabel::Love, EmotionLabel::Disgust).is_err());
    }

    #[test]
    fn sweep_picks_best_and_breaks_ties_low() {
        let data = blobs(&[vec![0.0, 0.0], vec![6.0, 0.0], vec![0.0, 6.0]], 30, 3);
        let val = blobs(&[vec![0.0, 0.0], vec![6.0, 0.0], vec![0.0, 6.0]], 10, 4);
        let test = blobs(&[vec![0.0, 0.0], vec![6.0, 0.0], vec![0.0, 6.0]], 10, 5);
        let r = sweep(Family::Knn, &[7.0, 1.0, 3.0], &Hyperparams::default(), &data, &val, &test, 0).unwrap();
        let max = r.points.iter().map(|p| p.val.macro_f1).fold(f64::MIN, f64::max);
        assert_eq!(r.best_val().macro_f1, max);
        // Well-separated blobs: every k is perfect, so the smallest wins.
        assert_eq!(r.best_value, 1.0);
        assert_eq!(r.points.iter().map(|p| p.value).collect::<Vec<_>>(), vec![1.0, 3.0, 7.0]);
        let single = sweep(Family::Knn, &[3.0], &Hyperparams::default(), &data, &val, &test, 0).unwrap();
        assert_eq!(single.best_value, 3.0);
        assert!(sweep(Family::Knn, &[], &Hyperparams::default(), &data, &val, &test, 0).is_err());
    }

    #[test]
    fn sweep_skips_k_above_training_size() {
        let centers = [vec![0.0, 0.0], vec![6.0, 0.0]];
        let data = blobs(&centers, 5, 1);
        let val = blobs(&centers, 3, 2);
        let r = sweep(Family::Knn, &[1.0, 10.0, 21.0], &Hyperparams::default(), &data, &val, &val, 0).unwrap();
        assert_eq!(r.points.iter().map(|p| p.value).collect::<Vec<_>>(), vec![1.0, 10.0]);
        let err = sweep(Family::Knn, &[11.0, 21.0], &Hyperparams::default(), &data, &val, &val, 0).unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)));
    }

    #[test]
    fn writers() {
        let dir = tempfile::tempdir().unwrap();
        let prov = Provenance {
            config_hash: "abc".into(),
            seed: 3,
        };
        let names = Task::Big4.class_names();
        let conf = vec![vec![1, 0, 0, 0], vec![0, 2, 0, 0], vec![0, 0, 3, 0], vec![0, 0, 1, 4]];
        let path = dir.path().join("confusion.csv");
        write_confusion_csv(&path, &conf, &names, &prov).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# config_hash=abc seed=3");
        assert_eq!(lines[1], "true\\predicted,HCN,HCP,LCN,LCP");
        assert_eq!(lines[5], "LCP,0,0,1,4");
    }
}
