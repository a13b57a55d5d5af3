//! Two-stage aggregation of per-frame features into one 136-value vector
//! per clip.
//!
//! 1. Short-term: 34 features per frame, plus their frame-to-frame deltas
//!    (68 rows, first column of deltas zero).
//! 2. Mid-term: the 68-row matrix is cut into segments; each segment
//!    contributes per-row means followed by per-row population standard
//!    deviations (136 values).
//! 3. The segment vectors are averaged into the clip vector.

use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::dsp::{frame_signal, seconds_to_samples};
use crate::error::{Error, Result};
use crate::features::{FrameExtractor, FEATURE_NAMES, N_FEATURES};
use crate::taxonomy::EmotionLabel;

pub const N_SHORT_TERM_ROWS: usize = 2 * N_FEATURES;
pub const N_AGGREGATE: usize = 2 * N_SHORT_TERM_ROWS;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregationParams {
    pub st_win: f64,
    pub st_step: f64,
    pub mt_win: f64,
    pub mt_step: f64,
}

impl Default for AggregationParams {
    fn default() -> Self {
        AggregationParams {
            st_win: 0.05,
            st_step: 0.05,
            mt_win: 1.0,
            mt_step: 1.0,
        }
    }
}

fn whole_ratio(num: f64, den: f64, what: &str) -> Result<usize> {
    let ratio = num / den;
    let rounded = ratio.round();
    if rounded < 1.0 || (ratio - rounded).abs() > 1e-6 {
        return Err(Error::InvalidParameter(format!(
            "{what} ratio {ratio} must be a whole number >= 1"
        )));
    }
    Ok(rounded as usize)
}

impl AggregationParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.st_win, self.st_step, self.mt_win, self.mt_step];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidParameter(format!("window parameters must be positive: {self:?}")));
        }
        if self.mt_win < self.st_win {
            return Err(Error::InvalidParameter(format!(
                "mid-term window {} shorter than short-term window {}",
                self.mt_win, self.st_win
            )));
        }
        self.segment_frames()?;
        Ok(())
    }

    /// Mid-term segment length and hop, in short-term frames.
    pub fn segment_frames(&self) -> Result<(usize, usize)> {
        Ok((
            whole_ratio(self.mt_win, self.st_step, "mid-term window / short-term step")?,
            whole_ratio(self.mt_step, self.st_step, "mid-term step / short-term step")?,
        ))
    }
}

/// 68 rows (34 features then 34 deltas) by `T` frames.
#[derive(Debug, Clone, PartialEq)]
pub struct ShortTermMatrix {
    rows: Vec<Vec<f64>>,
}

impl ShortTermMatrix {
    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn n_frames(&self) -> usize {
        self.rows[0].len()
    }
}

/// Stacks deltas under the per-frame features. Each input item is one
/// frame's 34 features; the delta at frame 0 is zero.
pub fn append_deltas(frames: &[[f64; N_FEATURES]]) -> Result<ShortTermMatrix> {
    if frames.is_empty() {
        return Err(Error::InsufficientData("no short-term frames".into()));
    }
    let t = frames.len();
    let mut rows = vec![vec![0.0; t]; N_SHORT_TERM_ROWS];
    for (col, frame) in frames.iter().enumerate() {
        for (r, &v) in frame.iter().enumerate() {
            rows[r][col] = v;
            if col > 0 {
                rows[r + N_FEATURES][col] = v - frames[col - 1][r];
            }
        }
    }
    Ok(ShortTermMatrix { rows })
}

/// Segment boundaries `[start, end)` over `n_frames`: full segments of
/// `len` frames every `hop`, plus a trailing partial segment when it holds at
/// least half a segment. A sequence shorter than one segment is a single
/// segment.
pub fn segment_bounds(n_frames: usize, len: usize, hop: usize) -> Vec<(usize, usize)> {
    if n_frames == 0 {
        return Vec::new();
    }
    if n_frames < len {
        return vec![(0, n_frames)];
    }
    let full = (n_frames - len) / hop + 1;
    let mut bounds: Vec<(usize, usize)> = (0..full).map(|m| (m * hop, m * hop + len)).collect();
    let covered = (full - 1) * hop + len;
    let tail_start = full * hop;
    if covered < n_frames && 2 * (n_frames - tail_start) >= len {
        bounds.push((tail_start, n_frames));
    }
    bounds
}

/// Mean and population standard deviation of each row per segment.
/// Returns one 136-value column per segment.
pub fn midterm_stats(st: &ShortTermMatrix, params: &AggregationParams) -> Result<Vec<Vec<f64>>> {
    let (len, hop) = params.segment_frames()?;
    let t = st.n_frames();
    if t == 0 {
        return Err(Error::InsufficientData("no short-term frames".into()));
    }
    Ok(segment_bounds(t, len, hop)
        .into_iter()
        .map(|(a, b)| {
            let n = (b - a) as f64;
            let mut column = vec![0.0; N_AGGREGATE];
            for (r, row) in st.rows.iter().enumerate() {
                let seg = &row[a..b];
                let mean = seg.iter().sum::<f64>() / n;
                let var = seg.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                column[r] = mean;
                column[r + N_SHORT_TERM_ROWS] = var.sqrt();
            }
            column
        })
        .collect())
}

/// The 136-value description of one clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipFeatureVector {
    pub values: Vec<f64>,
    pub label: Option<EmotionLabel>,
    pub singer_id: Option<String>,
    pub clip_path: Option<String>,
}

impl ClipFeatureVector {
    pub fn unlabeled(values: Vec<f64>) -> Self {
        ClipFeatureVector {
            values,
            label: None,
            singer_id: None,
            clip_path: None,
        }
    }
}

/// Element-wise mean over segment columns.
pub fn clip_vector(mt: &[Vec<f64>]) -> Result<ClipFeatureVector> {
    let first = mt
        .first()
        .ok_or_else(|| Error::InsufficientData("no mid-term segments".into()))?;
    let mut values = vec![0.0; first.len()];
    for column in mt {
        if column.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: values.len(),
                actual: column.len(),
            });
        }
        values.iter_mut().zip(column).for_each(|(acc, v)| *acc += v);
    }
    let m = mt.len() as f64;
    values.iter_mut().for_each(|v| *v /= m);
    Ok(ClipFeatureVector::unlabeled(values))
}

/// Runs the short-term features over every frame of `clip`.
pub fn short_term_features(clip: &AudioClip, params: &AggregationParams) -> Result<Vec<[f64; N_FEATURES]>> {
    params.validate()?;
    let frames = frame_signal(clip, params.st_win, params.st_step)?;
    let extractor = FrameExtractor::new(frames.frame_len(), clip.sample_rate())?;
    let mut prev = None;
    let mut out = Vec::with_capacity(frames.len());
    for frame in frames.frames() {
        let (v, spectrum) = extractor.extract_frame(frame, prev.as_ref())?;
        out.push(v);
        prev = Some(spectrum);
    }
    Ok(out)
}

/// Full pipeline from samples to the 136-value clip vector.
pub fn extract_clip(clip: &AudioClip, params: &AggregationParams) -> Result<ClipFeatureVector> {
    params.validate()?;
    let window = seconds_to_samples(params.st_win, clip.sample_rate());
    if clip.samples().len() < window {
        return Err(Error::ClipTooShort {
            samples: clip.samples().len(),
            window,
        });
    }
    let st = append_deltas(&short_term_features(clip, params)?)?;
    let mt = midterm_stats(&st, params)?;
    let mut v = clip_vector(&mt)?;
    v.clip_path = Some(clip.source_path().to_string());
    Ok(v)
}

/// Name of aggregate slot `index` (0-based), e.g. `mean_spectral_rolloff`
/// or `std_delta_mfcc_7`.
pub fn aggregate_feature_name(index: usize) -> Option<String> {
    if index >= N_AGGREGATE {
        return None;
    }
    let stat = if index < N_SHORT_TERM_ROWS { "mean" } else { "std" };
    let row = index % N_SHORT_TERM_ROWS;
    let delta = if row >= N_FEATURES { "delta_" } else { "" };
    Some(format!("{stat}_{delta}{}", FEATURE_NAMES[row % N_FEATURES]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feature_frames(rows: &[Vec<f64>]) -> Vec<[f64; N_FEATURES]> {
        let t = rows[0].len();
        (0..t)
            .map(|c| std::array::from_fn(|r| rows.get(r).map_or(0.0, |row| row[c])))
            .collect()
    }

    #[test]
    fn deltas() {
        let frames = feature_frames(&[vec![1.0, 3.0, 6.0], vec![2.0, 2.0, 2.0]]);
        let st = append_deltas(&frames).unwrap();
        assert_eq!(st.rows().len(), 68);
        assert_eq!(st.rows()[34], vec![0.0, 2.0, 3.0]);
        assert_eq!(st.rows()[35], vec![0.0, 0.0, 0.0]);

        let single = append_deltas(&feature_frames(&[vec![5.0]])).unwrap();
        assert_eq!(single.n_frames(), 1);
        assert!(single.rows()[34..].iter().all(|r| r == &vec![0.0]));
        assert!(append_deltas(&[]).is_err());
    }

    #[test]
    fn segments() {
        assert_eq!(segment_bounds(100, 20, 20).len(), 5);
        assert_eq!(segment_bounds(20, 20, 20), vec![(0, 20)]);
        assert_eq!(segment_bounds(29, 20, 20), vec![(0, 20)]);
        assert_eq!(segment_bounds(30, 20, 20), vec![(0, 20), (20, 30)]);
        assert_eq!(segment_bounds(6, 20, 20), vec![(0, 6)]);
        assert_eq!(segment_bounds(100, 20, 10).len(), 9);
    }

    #[test]
    fn stats_of_one_segment() {
        let row: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let st = append_deltas(&feature_frames(std::slice::from_ref(&row))).unwrap();
        let mt = midterm_stats(&st, &AggregationParams::default()).unwrap();
        assert_eq!(mt.len(), 1);
        assert_eq!(mt[0].len(), 136);
        let mean = 9.5;
        let std = (row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 20.0).sqrt();
        assert!((mt[0][0] - mean).abs() < 1e-12);
        assert!((mt[0][68] - std).abs() < 1e-12);
        // Delta row: 0 then nineteen 1s.
        assert!((mt[0][34] - 19.0 / 20.0).abs() < 1e-12);
    }

    #[test]
    fn clip_vector_cases() {
        let v: Vec<f64> = (0..136).map(|i| i as f64 * 0.5 - 3.0).collect();
        assert_eq!(clip_vector(std::slice::from_ref(&v)).unwrap().values, v);
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        assert!(clip_vector(&[v, neg]).unwrap().values.iter().all(|&x| x == 0.0));
        assert!(clip_vector(&[]).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(AggregationParams::default().validate().is_ok());
        let bad = AggregationParams {
            mt_win: 1.03,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let inverted = AggregationParams {
            st_win: 2.0,
            ..Default::default()
        };
        assert!(inverted.validate().is_err());
    }

    #[test]
    fn names() {
        assert_eq!(aggregate_feature_name(7).unwrap(), "mean_spectral_rolloff");
        assert_eq!(aggregate_feature_name(0).unwrap(), "mean_zcr");
        assert_eq!(aggregate_feature_name(34).unwrap(), "mean_delta_zcr");
        assert_eq!(aggregate_feature_name(68 + 34 + 14).unwrap(), "std_delta_mfcc_7");
        assert_eq!(aggregate_feature_name(135).unwrap(), "std_delta_chroma_deviation");
        assert!(aggregate_feature_name(136).is_none());
    }
}
