//! Audio ingestion: WAV decoding to canonical mono, linear-interpolation
//! resampling, and scanning of `root/<singer>/<emotion>/<clip>.wav` trees.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::{parse_label, EmotionLabel};

/// Sample rate every clip is brought to before feature extraction.
pub const CANONICAL_SAMPLE_RATE: u32 = 16_000;

pub const MIN_CLIP_SECONDS: f64 = 0.2;
pub const MAX_CLIP_SECONDS: f64 = 60.0;

/// Mono PCM audio with amplitudes in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
    source_path: String,
}

impl AudioClip {
    /// Builds a clip from raw samples, clamping into `[-1, 1]`.
    ///
    /// Fails on empty input, non-finite samples, or a zero sample rate.
    pub fn new(samples: Vec<f64>, sample_rate: u32, source_path: impl Into<String>) -> Result<Self> {
        let source_path = source_path.into();
        if sample_rate == 0 {
            return Err(Error::InvalidParameter("sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::EmptyAudio {
                path: source_path.into(),
            });
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::UnsupportedAudio {
                path: source_path.into(),
                reason: "non-finite sample values".into(),
            });
        }
        let samples = samples.into_iter().map(|s| s.clamp(-1.0, 1.0)).collect();
        Ok(AudioClip {
            samples,
            sample_rate,
            source_path,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn source_path(&self) -> &str {
        &self.source_path
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Decodes a PCM WAV file (8/16/24/32-bit integer or 32-bit float, mono or
/// stereo) into a mono clip. Stereo is averaged; integers are divided by
/// their full-scale value.
pub fn load_clip(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let reader = WavReader::open(path).map_err(|e| hound_error(path, e))?;
    let spec = reader.spec();
    if spec.channels == 0 || spec.channels > 2 {
        return Err(Error::UnsupportedAudio {
            path: path.into(),
            reason: format!("{} channels (expected 1 or 2)", spec.channels),
        });
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| hound_error(path, e))?,
        (SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let full_scale = (1u64 << (bits - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 / full_scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| hound_error(path, e))?
        }
        (format, bits) => {
            return Err(Error::UnsupportedAudio {
                path: path.into(),
                reason: format!("{bits}-bit {format:?} samples"),
            })
        }
    };
    if interleaved.is_empty() {
        return Err(Error::EmptyAudio { path: path.into() });
    }
    let mono: Vec<f64> = if spec.channels == 2 {
        interleaved.chunks_exact(2).map(|lr| 0.5 * (lr[0] + lr[1])).collect()
    } else {
        interleaved
    };
    let clip = AudioClip::new(mono, spec.sample_rate, path.to_string_lossy())?;
    let seconds = clip.duration();
    if !(MIN_CLIP_SECONDS..=MAX_CLIP_SECONDS).contains(&seconds) {
        return Err(Error::DurationOutOfRange {
            path: path.into(),
            seconds,
            min: MIN_CLIP_SECONDS,
            max: MAX_CLIP_SECONDS,
        });
    }
    Ok(clip)
}

fn hound_error(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(source) => Error::io(path, source),
        hound::Error::Unsupported => Error::UnsupportedAudio {
            path: path.into(),
            reason: "compressed or non-PCM encoding".into(),
        },
        other => Error::UnsupportedAudio {
            path: path.into(),
            reason: other.to_string(),
        },
    }
}

/// Sample encodings accepted by [`write_clip`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Int8,
    Int16,
    Int24,
    Int32,
    Float32,
}

/// Writes a mono clip as PCM WAV. Integer encodings round to the nearest
/// step and saturate at full scale.
pub fn write_clip(path: impl AsRef<Path>, clip: &AudioClip, encoding: WavEncoding) -> Result<()> {
    let path = path.as_ref();
    let (bits, format) = match encoding {
        WavEncoding::Int8 => (8, SampleFormat::Int),
        WavEncoding::Int16 => (16, SampleFormat::Int),
        WavEncoding::Int24 => (24, SampleFormat::Int),
        WavEncoding::Int32 => (32, SampleFormat::Int),
        WavEncoding::Float32 => (32, SampleFormat::Float),
    };
    let spec = WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: bits,
        sample_format: format,
    };
    let mut writer = WavWriter::create(path, spec).map_err(|e| hound_error(path, e))?;
    let result: std::result::Result<(), hound::Error> = (|| {
        match format {
            SampleFormat::Float => {
                for &s in &clip.samples {
                    writer.write_sample(s as f32)?;
                }
            }
            SampleFormat::Int => {
                let full_scale = (1i64 << (bits - 1)) as f64;
                let (lo, hi) = (-full_scale, full_scale - 1.0);
                for &s in &clip.samples {
                    let q = (s * full_scale).round().clamp(lo, hi) as i64;
                    if bits == 8 {
                        writer.write_sample(q as i8)?;
                    } else {
                        writer.write_sample(q as i32)?;
                    }
                }
            }
        }
        writer.finalize()
    })();
    result.map_err(|e| hound_error(path, e))
}

/// Linear-interpolation resampling. Returns the clip unchanged when the
/// rates already match.
pub fn resample(clip: &AudioClip, target_sr: u32) -> Result<AudioClip> {
    if target_sr == 0 {
        return Err(Error::InvalidParameter("target sample rate must be positive".into()));
    }
    if target_sr == clip.sample_rate {
        return Ok(clip.clone());
    }
    let src = &clip.samples;
    let ratio = clip.sample_rate as f64 / target_sr as f64;
    let out_len = ((src.len() as f64 / ratio).round() as usize).max(1);
    let last = src.len() - 1;
    let samples = (0..out_len)
        .map(|i| {
            let pos = i as f64 * ratio;
            let left = pos.floor() as usize;
            if left >= last {
                return src[last];
            }
            let frac = pos - left as f64;
            src[left] + (src[left + 1] - src[left]) * frac
        })
        .collect();
    Ok(AudioClip {
        samples,
        sample_rate: target_sr,
        source_path: clip.source_path.clone(),
    })
}

/// Loads a WAV file and resamples it to [`CANONICAL_SAMPLE_RATE`].
pub fn load_canonical(path: impl AsRef<Path>) -> Result<AudioClip> {
    resample(&load_clip(path)?, CANONICAL_SAMPLE_RATE)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub clip_path: PathBuf,
    pub singer_id: String,
    pub emotion: EmotionLabel,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn singers(&self) -> BTreeSet<&str> {
        self.entries.iter().map(|e| e.singer_id.as_str()).collect()
    }

    pub fn retain_singers(&mut self, singers: &[String]) {
        self.entries.retain(|e| singers.iter().any(|s| s == &e.singer_id));
    }

    /// Writes `clip_path,singer_id,emotion` CSV with LF line endings.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["clip_path", "singer_id", "emotion"])?;
        for e in &self.entries {
            w.write_record([
                e.clip_path.to_string_lossy().as_ref(),
                e.singer_id.as_str(),
                e.emotion.name(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<manifest>", e))?;
        Ok(())
    }
}

fn sorted_dir(path: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(path, err)))
        .collect::<Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

fn is_wav(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
}

/// Scans `root/<singer_id>/<emotion_label>/<clip>.wav`.
///
/// Emotion directories that do not name one of the twenty labels are
/// skipped with a warning. Entries are ordered lexicographically by path.
pub fn scan_dataset(root: impl AsRef<Path>) -> Result<DatasetManifest> {
    let root = root.as_ref();
    let mut entries = Vec::new();
    for singer_dir in sorted_dir(root)? {
        if !singer_dir.is_dir() {
            continue;
        }
        let Some(singer_id) = singer_dir.file_name().and_then(|n| n.to_str()).map(str::to_string) else {
            continue;
        };
        if singer_id.is_empty() {
            continue;
        }
        for emotion_dir in sorted_dir(&singer_dir)? {
            if !emotion_dir.is_dir() {
                continue;
            }
            let name = emotion_dir.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            let emotion = match parse_label(name) {
                Ok(e) => e,
                Err(_) => {
                    warn!("skipping {}: not an emotion label", emotion_dir.display());
                    continue;
                }
            };
            for clip_path in sorted_dir(&emotion_dir)? {
                if is_wav(&clip_path) {
                    entries.push(ManifestEntry {
                        clip_path,
                        singer_id: singer_id.clone(),
                        emotion,
                    });
                }
            }
        }
    }
    if entries.is_empty() {
        return Err(Error::EmptyDataset(root.into()));
    }
    entries.sort_by(|a, b| a.clip_path.cmp(&b.clip_path));
    entries.dedup_by(|a, b| a.clip_path == b.clip_path);
    Ok(DatasetManifest {
        root: root.into(),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn write_raw(path: &Path, spec: WavSpec, samples: &[i32]) {
        let mut w = WavWriter::create(path, spec).unwrap();
        for &s in samples {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
    }

    fn spec(channels: u16, bits: u16) -> WavSpec {
        WavSpec {
            channels,
            sample_rate: 16_000,
            bits_per_sample: bits,
            sample_format: SampleFormat::Int,
        }
    }

    #[test]
    fn sixteen_bit_half_scale() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("half.wav");
        write_raw(&path, spec(1, 16), &vec![16384; 8000]);
        let clip = load_clip(&path).unwrap();
        assert_eq!(clip.samples().len(), 8000);
        assert!(clip.samples().iter().all(|&s| s == 0.5));
        assert_eq!(clip.sample_rate(), 16_000);
    }

    #[test]
    fn stereo_opposite_channels_cancel() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stereo.wav");
        let frames: Vec<i32> = (0..8000).flat_map(|_| [16384, -16384]).collect();
        write_raw(&path, spec(2, 16), &frames);
        let clip = load_clip(&path).unwrap();
        assert_eq!(clip.samples().len(), 8000);
        assert!(clip.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn sine_round_trip_within_one_step() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sine.wav");
        let samples: Vec<f64> = (0..16_000)
            .map(|n| (2.0 * PI * 440.0 * n as f64 / 16_000.0).sin())
            .collect();
        let clip = AudioClip::new(samples, 16_000, "mem").unwrap();
        write_clip(&path, &clip, WavEncoding::Int16).unwrap();
        let back = load_clip(&path).unwrap();
        assert_eq!(back.samples().len(), 16_000);
        let lsb = 1.0 / 32768.0;
        let peak = back.samples().iter().fold(0.0f64, |m, s| m.max(s.abs()));
        assert!((peak - 1.0).abs() <= lsb, "peak {peak}");
        for (a, b) in clip.samples().iter().zip(back.samples()) {
            assert!((a - b).abs() <= lsb);
        }
    }

    #[test]
    fn all_integer_depths_and_float_decode() {
        let dir = tempfile::tempdir().unwrap();
        let samples: Vec<f64> = (0..4000).map(|n| 0.8 * (n as f64 * 0.01).sin()).collect();
        let clip = AudioClip::new(samples, 16_000, "mem").unwrap();
        for (enc, step) in [
            (WavEncoding::Int8, 1.0 / 128.0),
            (WavEncoding::Int16, 1.0 / 32768.0),
            (WavEncoding::Int24, 1.0 / 8_388_608.0),
            (WavEncoding::Int32, 1.0 / 2_147_483_648.0),
            (WavEncoding::Float32, 1e-7),
        ] {
            let path = dir.path().join(format!("{enc:?}.wav"));
            write_clip(&path, &clip, enc).unwrap();
            let back = load_clip(&path).unwrap();
            let err = clip
                .samples()
                .iter()
                .zip(back.samples())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(err <= step, "{enc:?}: {err}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("missing.wav");
        assert!(matches!(load_clip(&missing), Err(Error::Io { .. })));

        let garbage = dir.path().join("garbage.wav");
        fs::write(&garbage, b"definitely not a riff header").unwrap();
        let err = load_clip(&garbage).unwrap_err();
        assert!(err.to_string().contains("garbage.wav"));

        let empty = dir.path().join("empty.wav");
        write_raw(&empty, spec(1, 16), &[]);
        assert!(matches!(load_clip(&empty), Err(Error::EmptyAudio { .. })));

        let short = dir.path().join("short.wav");
        write_raw(&short, spec(1, 16), &[0; 1000]);
        assert!(matches!(load_clip(&short), Err(Error::DurationOutOfRange { .. })));
    }

    #[test]
    fn resample_identity_and_constant() {
        let clip = AudioClip::new(vec![0.1, 0.2, 0.3, 0.4], 16_000, "x").unwrap();
        assert_eq!(resample(&clip, 16_000).unwrap(), clip);

        let constant = AudioClip::new(vec![0.3; 44_100], 44_100, "c").unwrap();
        let out = resample(&constant, 16_000).unwrap();
        assert_eq!(out.samples().len(), 16_000);
        assert!(out.samples().iter().all(|&s| (s - 0.3).abs() < 1e-12));
    }

    #[test]
    fn resample_sine_matches_analytic() {
        let f = 100.0;
        let src: Vec<f64> = (0..48_000).map(|n| (2.0 * PI * f * n as f64 / 48_000.0).sin()).collect();
        let clip = AudioClip::new(src, 48_000, "s").unwrap();
        let out = resample(&clip, 16_000).unwrap();
        assert!((out.duration() - clip.duration()).abs() <= 1.0 / 16_000.0);
        for (i, &s) in out.samples().iter().enumerate() {
            let expected = (2.0 * PI * f * i as f64 / 16_000.0).sin();
            assert!((s - expected).abs() < 0.01);
        }
        // Non-integer ratio.
        let out = resample(&clip, 22_050).unwrap();
        for (i, &s) in out.samples().iter().enumerate() {
            let expected = (2.0 * PI * f * i as f64 / 22_050.0).sin();
            assert!((s - expected).abs() < 0.01);
        }
    }

    fn touch_wav(path: &Path) {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        write_raw(path, spec(1, 16), &[0; 4000]);
    }

    #[test]
    fn scan_small_tree() {
        let dir = tempfile::tempdir().unwrap();
        touch_wav(&dir.path().join("s1/anger/a.wav"));
        touch_wav(&dir.path().join("s1/joy/b.wav"));
        touch_wav(&dir.path().join("s1/boredom/c.wav"));
        fs::write(dir.path().join("s1/joy/notes.txt"), "x").unwrap();
        let m = scan_dataset(dir.path()).unwrap();
        assert_eq!(m.entries.len(), 2);
        let labels: BTreeSet<_> = m.entries.iter().map(|e| e.emotion).collect();
        assert_eq!(labels, BTreeSet::from([EmotionLabel::Anger, EmotionLabel::Joy]));
        assert!(m.entries.iter().all(|e| e.singer_id == "s1"));
    }

    #[test]
    fn scan_full_grid_counts_and_orders() {
        let dir = tempfile::tempdir().unwrap();
        for singer in ["s3", "s1", "s2"] {
            for e in EmotionLabel::ALL {
                for k in 0..2 {
                    touch_wav(&dir.path().join(format!("{singer}/{}/{k}.wav", e.name().to_lowercase())));
                }
            }
        }
        let m = scan_dataset(dir.path()).unwrap();
        assert_eq!(m.entries.len(), 120);
        assert!(m.entries.windows(2).all(|w| w[0].clip_path < w[1].clip_path));
        assert_eq!(m.singers().len(), 3);

        let mut csv_out = Vec::new();
        m.write_csv(&mut csv_out).unwrap();
        let text = String::from_utf8(csv_out).unwrap();
        assert!(text.starts_with("clip_path,singer_id,emotion\n"));
        assert!(!text.contains('\r'));
        assert_eq!(text.lines().count(), 121);
    }

    #[test]
    fn scan_empty_is_error() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("s1/boredom")).unwrap();
        assert!(matches!(scan_dataset(dir.path()), Err(Error::EmptyDataset(_))));
    }
}
