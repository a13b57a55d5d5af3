//! Command-line experiment runner: `extract`, `train-eval`, `select` and
//! `report`.
//!
//! Settings come from flags, then an optional TOML file (`--config`), then
//! defaults. Every artifact carries a hash of the resolved settings and the
//! seed; output directory and thread count stay out of the hash, so runs
//! that differ only in those produce identical files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aggregation::{extract_clip, AggregationParams, ClipFeatureVector};
use crate::audio::{load_canonical, scan_dataset};
use crate::cache::{read_cache, read_sizes, write_cache, write_sizes};
use crate::classifiers::{Family, FfnnConfig, Hyperparams};
use crate::error::{Error, Result};
use crate::evaluation::{
    singer_holdout, stratified_split, sweep, write_confusion_csv, write_sweep_csv, FamilyReport, MetricsReport,
    Partitions, Provenance, SplitSizes, SplitSpec, SweepResult, Task,
};
use crate::selection::{additive_selection, full_run_models, write_selection_csv, SelectionMeta, SelectionTrace};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

/// Share of files that may fail to decode before `extract` reports failure.
pub const MAX_FAILED_FRACTION: f64 = 0.10;

#[derive(Debug, Parser)]
#[command(name = "prosody", version, about = "Emotion classification of sung phrases from prosodic features")]
pub struct Cli {
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decode a dataset tree and write the per-clip feature cache.
    Extract(RunArgs),
    /// Split, sweep each family's hyperparameter and score the test set.
    TrainEval(RunArgs),
    /// Rank features by additive selection with the network probe.
    Select(RunArgs),
    /// Print metrics.json as tables.
    Report(ReportArgs),
}

#[derive(Debug, Default, Clone, Args)]
pub struct RunArgs {
    /// Dataset root laid out as <singer>/<emotion>/<clip>.wav.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Feature cache CSV.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// emotions20, big4 or pair:<emotion>:<emotion>.
    #[arg(long)]
    pub taxonomy: Option<String>,
    /// Comma-separated singer ids (default: all).
    #[arg(long, value_delimiter = ',')]
    pub singers: Option<Vec<String>>,
    /// Comma-separated model families, or `all`.
    #[arg(long, value_delimiter = ',')]
    pub family: Option<Vec<String>>,
    /// Comma-separated hyperparameter values; needs a single family.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Stop feature selection after this many features.
    #[arg(long)]
    pub max_features: Option<usize>,
    #[arg(long)]
    pub st_win: Option<f64>,
    #[arg(long)]
    pub st_step: Option<f64>,
    #[arg(long)]
    pub mt_win: Option<f64>,
    #[arg(long)]
    pub mt_step: Option<f64>,
    /// Test on this singer and train on the others.
    #[arg(long)]
    pub holdout_singer: Option<String>,
    /// Training epochs of the selection probe network.
    #[arg(long)]
    pub probe_epochs: Option<usize>,
    /// TOML file with any of the settings above; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Output directory of a train-eval run, or a metrics.json path.
    #[arg(long)]
    pub out: PathBuf,
}

/// Settings file. Keys match the long flag names with `_` for `-`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub taxonomy: Option<String>,
    pub singers: Option<Vec<String>>,
    pub family: Option<Vec<String>>,
    pub grid: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub max_features: Option<usize>,
    pub st_win: Option<f64>,
    pub st_step: Option<f64>,
    pub mt_win: Option<f64>,
    pub mt_step: Option<f64>,
    pub holdout_singer: Option<String>,
    pub probe_epochs: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))
    }
}

/// Fully resolved settings of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub task: Task,
    /// Empty means every singer.
    pub singers: Vec<String>,
    pub families: Vec<Family>,
    pub grid: Option<Vec<f64>>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub max_features: Option<usize>,
    pub params: AggregationParams,
    pub split: SplitSpec,
    pub holdout_singer: Option<String>,
    pub hyper: Hyperparams,
    pub probe: FfnnConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: None,
            cache: None,
            out: None,
            task: Task::Emotions20,
            singers: Vec::new(),
            families: Family::CLASSICAL.to_vec(),
            grid: None,
            seed: 0,
            threads: None,
            max_features: None,
            params: AggregationParams::default(),
            split: SplitSpec::default(),
            holdout_singer: None,
            hyper: Hyperparams::default(),
            probe: FfnnConfig::default(),
        }
    }
}

fn parse_families(names: &[String]) -> Result<Vec<Family>> {
    if names.len() == 1 && names[0].trim().eq_ignore_ascii_case("all") {
        return Ok(Family::ALL.to_vec());
    }
    let mut families = Vec::new();
    for name in names {
        let f: Family = name.parse()?;
        if !families.contains(&f) {
            families.push(f);
        }
    }
    if families.is_empty() {
        return Err(Error::InvalidParameter("no model family given".into()));
    }
    Ok(families)
}

impl RunConfig {
    /// Flags first, then the settings file, then defaults.
    pub fn resolve(args: &RunArgs, threads: Option<usize>) -> Result<RunConfig> {
        let file = match &args.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let d = RunConfig::default();
        let base = AggregationParams::default();
        let seed = args.seed.or(file.seed).unwrap_or(d.seed);
        let params = AggregationParams {
            st_win: args.st_win.or(file.st_win).unwrap_or(base.st_win),
            st_step: args.st_step.or(file.st_step).unwrap_or(base.st_step),
            mt_win: args.mt_win.or(file.mt_win).unwrap_or(base.mt_win),
            mt_step: args.mt_step.or(file.mt_step).unwrap_or(base.mt_step),
        };
        params.validate()?;
        let task = match args.taxonomy.as_ref().or(file.taxonomy.as_ref()) {
            Some(t) => t.parse()?,
            None => d.task,
        };
        let families = match args.family.as_ref().or(file.family.as_ref()) {
            Some(names) => parse_families(names)?,
            None => d.families,
        };
        let grid = args.grid.clone().or(file.grid);
        if let Some(g) = &grid {
            if families.len() != 1 {
                return Err(Error::InvalidParameter("--grid needs exactly one --family".into()));
            }
            if g.is_empty() {
                return Err(Error::InvalidParameter("--grid is empty".into()));
            }
            for &v in g {
                Hyperparams::default().with_value(families[0], v)?;
            }
        }
        let mut probe = FfnnConfig::default();
        if let Some(e) = args.probe_epochs.or(file.probe_epochs) {
            if e == 0 {
                return Err(Error::InvalidParameter("--probe-epochs must be at least 1".into()));
            }
            probe.epochs = e;
        }
        let max_features = args.max_features.or(file.max_features);
        if max_features == Some(0) {
            return Err(Error::InvalidParameter("--max-features must be at least 1".into()));
        }
        let threads = threads.or(file.threads);
        if threads == Some(0) {
            return Err(Error::InvalidParameter("--threads must be at least 1".into()));
        }
        let mut singers = args.singers.clone().or(file.singers).unwrap_or_default();
        singers.retain(|s| !s.trim().is_empty());
        singers.iter_mut().for_each(|s| *s = s.trim().to_string());
        singers.sort();
        singers.dedup();
        Ok(RunConfig {
            data: args.data.clone().or(file.data),
            cache: args.cache.clone().or(file.cache),
            out: args.out.clone().or(file.out),
            task,
            singers,
            families,
            grid,
            seed,
            threads,
            max_features,
            params,
            split: SplitSpec { seed, ..d.split },
            holdout_singer: args.holdout_singer.clone().or(file.holdout_singer),
            hyper: d.hyper,
            probe,
        })
    }

    fn require<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
        value
            .as_deref()
            .ok_or_else(|| Error::InvalidParameter(format!("missing --{flag}")))
    }

    /// Hash of everything that can change an artifact, plus the bytes of
    /// the input the command reads.
    fn hash(&self, command: &str, input_digest: &str) -> String {
        #[derive(Serialize)]
        struct Key<'a> {
            command: &'a str,
            input: &'a str,
            task: String,
            singers: &'a [String],
            families: Vec<&'static str>,
            grid: &'a Option<Vec<f64>>,
            seed: u64,
            max_features: Option<usize>,
            params: &'a AggregationParams,
            split: &'a SplitSpec,
            holdout_singer: &'a Option<String>,
            hyper: &'a Hyperparams,
            probe: &'a FfnnConfig,
        }
        let key = Key {
            command,
            input: input_digest,
            task: self.task.to_string(),
            singers: &self.singers,
            families: self.families.iter().map(|f| f.name()).collect(),
            grid: &self.grid,
            seed: self.seed,
            max_features: self.max_features,
            params: &self.params,
            split: &self.split,
            holdout_singer: &self.holdout_singer,
            hyper: &self.hyper,
            probe: &self.probe,
        };
        let json = serde_json::to_string(&key).expect("plain data serializes");
        hex16(&Sha256::digest(json.as_bytes()))
    }

    fn provenance(&self, command: &str, input_digest: &str) -> Provenance {
        Provenance {
            config_hash: self.hash(command, input_digest),
            seed: self.seed,
        }
    }
}

fn hex16(bytes: &[u8]) -> String {
    bytes.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex16(&Sha256::digest(&bytes)))
}

fn relative_path(root: &Path, path: &Path) -> String {
    path.strip_prefix(root)
        .unwrap_or(path)
        .components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractSummary {
    pub total: usize,
    pub extracted: usize,
    pub reused: usize,
    pub failed: usize,
}

/// Scans the dataset and writes the feature cache. Clips whose relative
/// path, file size, labels and aggregation parameters match the existing
/// cache are reused. Unreadable clips are skipped with a warning; more than
/// 10% of them is an error, raised after the cache has been written.
pub fn run_extract(config: &RunConfig) -> Result<ExtractSummary> {
    let root = RunConfig::require(&config.data, "data")?;
    let cache_path = RunConfig::require(&config.cache, "cache")?;
    let mut manifest = scan_dataset(root)?;
    if !config.singers.is_empty() {
        manifest.retain_singers(&config.singers);
        if manifest.entries.is_empty() {
            return Err(Error::EmptyDataset(root.into()));
        }
    }

    let previous: BTreeMap<String, ClipFeatureVector> = match read_cache(cache_path, Some(&config.params)) {
        Ok((_, rows)) => rows
            .into_iter()
            .filter_map(|r| Some((r.clip_path.clone()?, r)))
            .collect(),
        Err(e) => {
            if cache_path.exists() {
                log::info!("rebuilding cache: {e}");
            }
            BTreeMap::new()
        }
    };
    let old_sizes = read_sizes(cache_path);

    enum Outcome {
        Reused(ClipFeatureVector, u64),
        Extracted(ClipFeatureVector, u64),
        Failed,
    }
    let outcomes: Vec<Outcome> = manifest
        .entries
        .par_iter()
        .map(|entry| {
            let rel = relative_path(root, &entry.clip_path);
            let size = match std::fs::metadata(&entry.clip_path) {
                Ok(m) => m.len(),
                Err(e) => {
                    log::warn!("skipping {rel}: {e}");
                    return Outcome::Failed;
                }
            };
            if let Some(row) = previous.get(&rel) {
                if old_sizes.get(&rel) == Some(&size)
                    && row.label == Some(entry.emotion)
                    && row.singer_id.as_deref() == Some(entry.singer_id.as_str())
                {
                    return Outcome::Reused(row.clone(), size);
                }
            }
            match load_canonical(&entry.clip_path).and_then(|clip| extract_clip(&clip, &config.params)) {
                Ok(mut v) => {
                    v.label = Some(entry.emotion);
                    v.singer_id = Some(entry.singer_id.clone());
                    v.clip_path = Some(rel);
                    Outcome::Extracted(v, size)
                }
                Err(e) => {
                    log::warn!("skipping {rel}: {e}");
                    Outcome::Failed
                }
            }
        })
        .collect();

    let mut rows = Vec::new();
    let mut sizes = BTreeMap::new();
    let mut summary = ExtractSummary {
        total: outcomes.len(),
        extracted: 0,
        reused: 0,
        failed: 0,
    };
    for outcome in outcomes {
        let (row, size) = match outcome {
            Outcome::Reused(row, size) => {
                summary.reused += 1;
                (row, size)
            }
            Outcome::Extracted(row, size) => {
                summary.extracted += 1;
                (row, size)
            }
            Outcome::Failed => {
                summary.failed += 1;
                continue;
            }
        };
        sizes.insert(row.clip_path.clone().unwrap_or_default(), size);
        rows.push(row);
    }
    if let Some(dir) = cache_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    write_cache(cache_path, &config.params, &rows)?;
    write_sizes(cache_path, &sizes)?;
    log::info!(
        "{} clips: {} extracted, {} reused, {} failed",
        summary.total,
        summary.extracted,
        summary.reused,
        summary.failed
    );
    if summary.failed as f64 > MAX_FAILED_FRACTION * summary.total as f64 {
        return Err(Error::InsufficientData(format!(
            "{} of {} clips failed to extract",
            summary.failed, summary.total
        )));
    }
    Ok(summary)
}

/// Cached clips of the configured singers that the task keeps, and the
/// cache digest.
fn load_task_clips(config: &RunConfig) -> Result<(Vec<ClipFeatureVector>, String)> {
    let cache_path = RunConfig::require(&config.cache, "cache")?;
    let digest = file_digest(cache_path)?;
    let (_, mut clips) = read_cache(cache_path, Some(&config.params))?;
    if !config.singers.is_empty() {
        clips.retain(|c| c.singer_id.as_ref().is_some_and(|s| config.singers.contains(s)));
    }
    let clips = config.task.filter(&clips);
    if clips.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no cached clips for taxonomy {} and the chosen singers",
            config.task
        )));
    }
    if let Task::Pair(a, b) = config.task {
        for e in [a, b] {
            if !clips.iter().any(|c| c.label == Some(e)) {
                return Err(Error::InsufficientData(format!("no cached clips labeled {e}")));
            }
        }
    }
    Ok((clips, digest))
}

fn partitions(config: &RunConfig, clips: &[ClipFeatureVector]) -> Result<Partitions> {
    match &config.holdout_singer {
        Some(singer) => singer_holdout(clips, singer, &config.split),
        None => stratified_split(clips, &config.split),
    }
}

fn prepare_out(config: &RunConfig) -> Result<&Path> {
    let out = RunConfig::require(&config.out, "out")?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    Ok(out)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn append_log(out: &Path, line: &str) {
    use std::io::Write;
    let path = out.join("run.log");
    let written = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .and_then(|mut f| writeln!(f, "{line}"));
    if let Err(e) = written {
        log::warn!("cannot write {}: {e}", path.display());
    }
}

fn unix_seconds() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// Sweeps every configured family and writes `metrics.json`, `sweep.csv`,
/// `confusion.csv` and `model.json` for the family with the best
/// validation macro-F1, plus `confusion_<family>.csv` and
/// `model_<family>.json` for each family.
pub fn run_train_eval(config: &RunConfig) -> Result<MetricsReport> {
    let started = Instant::now();
    let (clips, digest) = load_task_clips(config)?;
    let out = prepare_out(config)?;
    let provenance = config.provenance("train-eval", &digest);
    let (train_p, val_p, test_p) = partitions(config, &clips)?;
    let (train_set, val_set, test_set) = (
        config.task.labeled_set(&train_p)?,
        config.task.labeled_set(&val_p)?,
        config.task.labeled_set(&test_p)?,
    );
    let class_names = config.task.class_names();

    let mut sweeps: Vec<SweepResult> = Vec::new();
    for &family in &config.families {
        let grid = config.grid.clone().unwrap_or_else(|| family.default_grid());
        let t = Instant::now();
        let mut result = sweep(family, &grid, &config.hyper, &train_set, &val_set, &test_set, config.seed)?;
        result.model.config_hash = Some(provenance.config_hash.clone());
        log::info!(
            "{family}: test accuracy {:.1}, macro-F1 {:.1} ({:.1} s)",
            result.test.accuracy,
            result.test.macro_f1,
            t.elapsed().as_secs_f64()
        );
        sweeps.push(result);
    }

    let report = MetricsReport {
        config_hash: provenance.config_hash.clone(),
        seed: config.seed,
        taxonomy: config.task.to_string(),
        singers: config.singers.clone(),
        holdout_singer: config.holdout_singer.clone(),
        classes: class_names.clone(),
        split: config.split.clone(),
        split_sizes: SplitSizes {
            train: train_set.len(),
            val: val_set.len(),
            test: test_set.len(),
        },
        results: sweeps.iter().map(|s| FamilyReport::new(s, &class_names)).collect(),
    };
    report.write(&out.join("metrics.json"))?;
    write_sweep_csv(&out.join("sweep.csv"), &sweeps, &provenance)?;
    for s in &sweeps {
        write_confusion_csv(
            &out.join(format!("confusion_{}.csv", s.family.name())),
            &s.test.confusion,
            &class_names,
            &provenance,
        )?;
        s.model.save(out.join(format!("model_{}.json", s.family.name())))?;
    }
    if let Some(best) = report.best_index().map(|i| &sweeps[i]) {
        write_confusion_csv(&out.join("confusion.csv"), &best.test.confusion, &class_names, &provenance)?;
        best.model.save(out.join("model.json"))?;
    }
    append_log(
        out,
        &format!(
            "train-eval finished at unix time {} after {:.3} s, config {}",
            unix_seconds(),
            started.elapsed().as_secs_f64(),
            provenance.config_hash
        ),
    );
    Ok(report)
}

/// Additive selection on the training and validation partitions; writes
/// `selection.csv` and `selection_meta.json`.
pub fn run_select(config: &RunConfig) -> Result<SelectionTrace> {
    let started = Instant::now();
    let (clips, digest) = load_task_clips(config)?;
    let out = prepare_out(config)?;
    let provenance = config.provenance("select", &digest);
    let (train_p, val_p, _) = partitions(config, &clips)?;
    let train_set = config.task.labeled_set(&train_p)?;
    let val_set = config.task.labeled_set(&val_p)?;
    let trace = additive_selection(&train_set, &val_set, &config.probe, config.seed, config.max_features)?;
    write_selection_csv(&out.join("selection.csv"), &trace, &provenance)?;
    let meta = SelectionMeta {
        config_hash: provenance.config_hash.clone(),
        seed: config.seed,
        probe: config.probe.clone(),
        n_features: trace.n_features,
        rounds: trace.ranking.len(),
        models_trained: trace.models_trained,
        full_run_models: full_run_models(trace.n_features),
        train_clips: train_set.len(),
        val_clips: val_set.len(),
    };
    write_json(&out.join("selection_meta.json"), &meta)?;
    append_log(
        out,
        &format!(
            "select finished at unix time {} after {:.3} s wall clock, {} models, config {}",
            unix_seconds(),
            started.elapsed().as_secs_f64(),
            trace.models_trained,
            provenance.config_hash
        ),
    );
    Ok(trace)
}

pub fn run_report(args: &ReportArgs) -> Result<String> {
    let path = if args.out.is_dir() { args.out.join("metrics.json") } else { args.out.clone() };
    Ok(crate::evaluation::format_report(&MetricsReport::read(&path)?))
}

fn exit_code(e: &Error) -> i32 {
    if e.is_data_error() {
        EXIT_DATA
    } else {
        EXIT_USAGE
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let run = |args: &RunArgs| RunConfig::resolve(args, cli.threads);
    let threads = match &cli.command {
        Command::Report(_) => cli.threads,
        Command::Extract(a) | Command::TrainEval(a) | Command::Select(a) => run(a)?.threads,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Extract(a) => {
            let s = run_extract(&run(a)?)?;
            println!(
                "{} clips: {} extracted, {} reused, {} failed",
                s.total, s.extracted, s.reused, s.failed
            );
            Ok(())
        }
        Command::TrainEval(a) => {
            let report = run_train_eval(&run(a)?)?;
            print!("{}", crate::evaluation::format_report(&report));
            Ok(())
        }
        Command::Select(a) => {
            let trace = run_select(&run(a)?)?;
            println!(
                "selected {} of {} features with {} probe models",
                trace.ranking.len(),
                trace.n_features,
                trace.models_trained
            );
            Ok(())
        }
        Command::Report(a) => {
            print!("{}", run_report(a)?);
            Ok(())
        }
    })
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| dispatch(cli))) {
        Ok(Ok(())) => EXIT_OK,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
        Err(_) => EXIT_INTERNAL,
    }
}
