//! Feature cache: one CSV row of 136 aggregate values per clip.
//!
//! ```text
//! # prosody-feature-cache version=1 feature_order=1 sample_rate=16000 st_win=0.05 st_step=0.05 mt_win=1 mt_step=1
//! clip_path,singer_id,emotion,f1,...,f136
//! ```
//!
//! Values carry nine significant digits. A cache whose header does not match
//! the current format, feature order, or aggregation parameters is rejected
//! as stale. File sizes of the cached clips live in a `<cache>.sizes`
//! sidecar so unchanged clips can be skipped on re-extraction.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::aggregation::{AggregationParams, ClipFeatureVector, N_AGGREGATE};
use crate::audio::CANONICAL_SAMPLE_RATE;
use crate::error::{Error, Result};
use crate::taxonomy::parse_label;

pub const CACHE_VERSION: u32 = 1;
/// Bumped whenever the order or definition of the 136 values changes.
pub const FEATURE_ORDER_VERSION: u32 = 1;

const MAGIC: &str = "# prosody-feature-cache";

pub fn header_line(params: &AggregationParams) -> String {
    format!(
        "{MAGIC} version={CACHE_VERSION} feature_order={FEATURE_ORDER_VERSION} sample_rate={CANONICAL_SAMPLE_RATE} st_win={} st_step={} mt_win={} mt_step={}",
        params.st_win, params.st_step, params.mt_win, params.mt_step
    )
}

fn parse_header(path: &Path, line: &str) -> Result<AggregationParams> {
    let stale = |reason: String| Error::Cache {
        path: path.into(),
        reason,
    };
    let rest = line
        .strip_prefix(MAGIC)
        .ok_or_else(|| stale("missing cache header line".into()))?;
    let fields: BTreeMap<&str, &str> = rest.split_whitespace().filter_map(|kv| kv.split_once('=')).collect();
    let get = |key: &str| fields.get(key).copied().ok_or_else(|| stale(format!("header lacks {key}")));
    let expect = |key: &str, want: String| -> Result<()> {
        let got = get(key)?;
        if got != want {
            return Err(stale(format!("{key}={got}, current is {want}")));
        }
        Ok(())
    };
    expect("version", CACHE_VERSION.to_string())?;
    expect("feature_order", FEATURE_ORDER_VERSION.to_string())?;
    expect("sample_rate", CANONICAL_SAMPLE_RATE.to_string())?;
    let num = |key: &str| -> Result<f64> { get(key)?.parse().map_err(|_| stale(format!("bad {key}"))) };
    Ok(AggregationParams {
        st_win: num("st_win")?,
        st_step: num("st_step")?,
        mt_win: num("mt_win")?,
        mt_step: num("mt_step")?,
    })
}

fn column_names() -> Vec<String> {
    let mut cols = vec!["clip_path".to_string(), "singer_id".into(), "emotion".into()];
    cols.extend((1..=N_AGGREGATE).map(|i| format!("f{i}")));
    cols
}

/// Writes labeled clip vectors. Every row needs a path, singer and label.
pub fn write_cache(path: impl AsRef<Path>, params: &AggregationParams, rows: &[ClipFeatureVector]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{}", header_line(params)).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(column_names())?;
    for row in rows {
        let missing = |what: &str| Error::Cache {
            path: path.into(),
            reason: format!("row lacks {what}"),
        };
        if row.values.len() != N_AGGREGATE {
            return Err(Error::DimensionMismatch {
                expected: N_AGGREGATE,
                actual: row.values.len(),
            });
        }
        let mut record = vec![
            row.clip_path.clone().ok_or_else(|| missing("clip path"))?,
            row.singer_id.clone().ok_or_else(|| missing("singer"))?,
            row.label.ok_or_else(|| missing("label"))?.name().to_string(),
        ];
        record.extend(row.values.iter().map(|v| format!("{v:.8e}")));
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a cache, failing if its header is stale or, when `expected` is
/// given, its aggregation parameters differ.
pub fn read_cache(
    path: impl AsRef<Path>,
    expected: Option<&AggregationParams>,
) -> Result<(AggregationParams, Vec<ClipFeatureVector>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| Error::io(path, e))?;
    let params = parse_header(path, first.trim_end())?;
    if let Some(want) = expected {
        if want != &params {
            return Err(Error::Cache {
                path: path.into(),
                reason: format!("built with {params:?}, requested {want:?}"),
            });
        }
    }
    let mut csv = csv::ReaderBuilder::new().from_reader(reader);
    let headers = csv.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != column_names().iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::Cache {
            path: path.into(),
            reason: "unexpected column layout".into(),
        });
    }
    let mut rows = Vec::new();
    for record in csv.records() {
        let record = record?;
        let bad = |reason: String| Error::Cache {
            path: path.into(),
            reason,
        };
        let values = record
            .iter()
            .skip(3)
            .map(|v| v.parse::<f64>().map_err(|_| bad(format!("bad value {v:?}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(ClipFeatureVector {
            values,
            label: Some(parse_label(&record[2])?),
            singer_id: Some(record[1].to_string()),
            clip_path: Some(record[0].to_string()),
        });
    }
    Ok((params, rows))
}

pub fn sizes_path(cache: &Path) -> PathBuf {
    let mut name = cache.as_os_str().to_owned();
    name.push(".sizes");
    PathBuf::from(name)
}

pub fn write_sizes(cache: &Path, sizes: &BTreeMap<String, u64>) -> Result<()> {
    let path = sizes_path(cache);
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(&path)?;
    w.write_record(["clip_path", "file_size"])?;
    for (clip, size) in sizes {
        w.write_record([clip.as_str(), &size.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(())
}

/// Sidecar contents, or an empty map when it is absent or unreadable.
pub fn read_sizes(cache: &Path) -> BTreeMap<String, u64> {
    let Ok(mut r) = csv::Reader::from_path(sizes_path(cache)) else {
        return BTreeMap::new();
    };
    r.records()
        .filter_map(|rec| rec.ok())
        .filter_map(|rec| Some((rec.get(0)?.to_string(), rec.get(1)?.parse().ok()?)))
        .collect()
}
