//! Framing, windowed magnitude spectra, mel filterbanks, the orthonormal
//! DCT-II and the FFT-bin to pitch-class map.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::audio::AudioClip;
use crate::error::{Error, Result};

/// Non-overlapping (or overlapping) contiguous frames of a clip.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Vec<Vec<f64>>,
    frame_len: usize,
    step: usize,
    sample_rate: u32,
}

impl FrameSequence {
    pub fn frames(&self) -> &[Vec<f64>] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }
}

/// Converts a duration to a whole number of samples at `sample_rate`.
pub fn seconds_to_samples(seconds: f64, sample_rate: u32) -> usize {
    (seconds * sample_rate as f64).round() as usize
}

/// Slices a clip into `floor((len - frame_len) / step) + 1` frames; the
/// trailing remainder shorter than a window is dropped.
pub fn frame_signal(clip: &AudioClip, win_s: f64, step_s: f64) -> Result<FrameSequence> {
    if !(win_s > 0.0 && step_s > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "window {win_s}s and step {step_s}s must be positive"
        )));
    }
    let sr = clip.sample_rate();
    let frame_len = seconds_to_samples(win_s, sr);
    let step = seconds_to_samples(step_s, sr);
    if frame_len < 2 || step == 0 {
        return Err(Error::InvalidParameter(format!(
            "window {win_s}s / step {step_s}s too small at {sr} Hz"
        )));
    }
    let samples = clip.samples();
    if samples.len() < frame_len {
        return Err(Error::ClipTooShort {
            samples: samples.len(),
            window: frame_len,
        });
    }
    let count = (samples.len() - frame_len) / step + 1;
    let frames = (0..count)
        .map(|t| samples[t * step..t * step + frame_len].to_vec())
        .collect();
    Ok(FrameSequence {
        frames,
        frame_len,
        step,
        sample_rate: sr,
    })
}

/// Magnitudes of bins `0..=N/2` of a length-`N` frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    magnitudes: Vec<f64>,
    bin_hz: f64,
}

impl Spectrum {
    pub fn new(magnitudes: Vec<f64>, bin_hz: f64) -> Self {
        debug_assert!(magnitudes.iter().all(|m| *m >= 0.0 && m.is_finite()));
        Spectrum { magnitudes, bin_hz }
    }

    pub fn magnitudes(&self) -> &[f64] {
        &self.magnitudes
    }

    pub fn bin_hz(&self) -> f64 {
        self.bin_hz
    }

    pub fn len(&self) -> usize {
        self.magnitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.magnitudes.is_empty()
    }

    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_hz
    }

    /// Squared magnitudes.
    pub fn power(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.magnitudes.iter().map(|m| m * m)
    }
}

/// Symmetric Hamming window of length `n`.
pub fn hamming(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let denom = (n - 1) as f64;
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / denom).cos())
        .collect()
}

/// Hamming-windowed FFT of a fixed frame length. Planning happens once; the
/// analyzer is then reused for every frame of that length.
#[derive(Clone)]
pub struct SpectrumAnalyzer {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    sample_rate: u32,
}

impl std::fmt::Debug for SpectrumAnalyzer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectrumAnalyzer")
            .field("frame_len", &self.window.len())
            .field("sample_rate", &self.sample_rate)
            .finish()
    }
}

impl SpectrumAnalyzer {
    pub fn new(frame_len: usize, sample_rate: u32) -> Result<Self> {
        if frame_len < 2 {
            return Err(Error::InvalidParameter(format!("frame length {frame_len} < 2")));
        }
        let fft = FftPlanner::new().plan_fft_forward(frame_len);
        Ok(SpectrumAnalyzer {
            fft,
            window: hamming(frame_len),
            sample_rate,
        })
    }

    pub fn frame_len(&self) -> usize {
        self.window.len()
    }

    pub fn n_bins(&self) -> usize {
        self.window.len() / 2 + 1
    }

    pub fn bin_hz(&self) -> f64 {
        self.sample_rate as f64 / self.window.len() as f64
    }

    pub fn magnitude_spectrum(&self, frame: &[f64]) -> Result<Spectrum> {
        if frame.len() != self.window.len() {
            return Err(Error::DimensionMismatch {
                expected: self.window.len(),
                actual: frame.len(),
            });
        }
        let mut buf: Vec<Complex<f64>> = frame
            .iter()
            .zip(&self.window)
            .map(|(s, w)| Complex::new(s * w, 0.0))
            .collect();
        self.fft.process(&mut buf);
        let magnitudes = buf[..self.n_bins()].iter().map(|c| c.norm()).collect();
        Ok(Spectrum::new(magnitudes, self.bin_hz()))
    }
}

/// One-shot windowed magnitude spectrum; plans a fresh FFT per call.
pub fn magnitude_spectrum(frame: &[f64], sample_rate: u32) -> Result<Spectrum> {
    SpectrumAnalyzer::new(frame.len(), sample_rate)?.magnitude_spectrum(frame)
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters with centers equally spaced on the mel scale between
/// 0 Hz and Nyquist. Each triangle spans from its left neighbor's center to
/// its right neighbor's center, peaking at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterBank {
    weights: Vec<Vec<f64>>,
    /// `n_filters + 2` edge frequencies in Hz; filter `j` spans
    /// `edges[j]..edges[j + 2]` and peaks at `edges[j + 1]`.
    edges_hz: Vec<f64>,
    n_fft_bins: usize,
}

impl MelFilterBank {
    /// Bank for a spectrum of `n_fft_bins` bins from an even-length FFT
    /// (`N = 2 * (n_fft_bins - 1)`).
    pub fn new(sample_rate: u32, n_fft_bins: usize, n_filters: usize) -> Result<Self> {
        let frame_len = 2 * n_fft_bins.saturating_sub(1);
        Self::for_frame(sample_rate, frame_len.max(2), n_filters)
    }

    /// Bank for the spectrum of a `frame_len`-sample FFT.
    pub fn for_frame(sample_rate: u32, frame_len: usize, n_filters: usize) -> Result<Self> {
        let n_fft_bins = frame_len / 2 + 1;
        if n_filters < 13 {
            return Err(Error::InvalidParameter(format!("{n_filters} mel filters (need >= 13)")));
        }
        if n_fft_bins < n_filters {
            return Err(Error::InvalidParameter(format!(
                "{n_fft_bins} FFT bins cannot hold {n_filters} mel filters"
            )));
        }
        let nyquist = sample_rate as f64 / 2.0;
        let top = hz_to_mel(nyquist);
        let edges_hz: Vec<f64> = (0..n_filters + 2)
            .map(|i| mel_to_hz(top * i as f64 / (n_filters + 1) as f64))
            .collect();
        let bin_hz = sample_rate as f64 / frame_len as f64;
        let mut bank = MelFilterBank {
            weights: Vec::new(),
            edges_hz,
            n_fft_bins,
        };
        bank.weights = (0..n_filters)
            .map(|j| (0..n_fft_bins).map(|k| bank.response(j, k as f64 * bin_hz)).collect())
            .collect();
        Ok(bank)
    }

    /// Triangle value of filter `j` at frequency `hz`.
    pub fn response(&self, j: usize, hz: f64) -> f64 {
        let (lo, center, hi) = (self.edges_hz[j], self.edges_hz[j + 1], self.edges_hz[j + 2]);
        if hz <= lo || hz >= hi {
            0.0
        } else if hz <= center {
            (hz - lo) / (center - lo)
        } else {
            (hi - hz) / (hi - center)
        }
    }

    pub fn n_filters(&self) -> usize {
        self.weights.len()
    }

    pub fn n_fft_bins(&self) -> usize {
        self.n_fft_bins
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.edges_hz[1..self.edges_hz.len() - 1]
    }

    pub fn edges_hz(&self) -> &[f64] {
        &self.edges_hz
    }

    /// `E_j = sum_k weights[j][k] * power[k]`.
    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|row| row.iter().zip(power).map(|(w, p)| w * p).sum())
            .collect()
    }
}

pub fn build_mel_filterbank(sample_rate: u32, n_fft_bins: usize, n_filters: usize) -> Result<MelFilterBank> {
    MelFilterBank::new(sample_rate, n_fft_bins, n_filters)
}

/// Orthonormal DCT-II of a fixed input length, computed with one complex
/// FFT of the even/odd reordered input.
#[derive(Clone)]
pub struct Dct {
    fft: Arc<dyn Fft<f64>>,
    twiddles: Vec<Complex<f64>>,
    scale: Vec<f64>,
}

impl std::fmt::Debug for Dct {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dct").field("len", &self.scale.len()).finish()
    }
}

impl Dct {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("DCT length must be positive".into()));
        }
        let fft = FftPlanner::new().plan_fft_forward(n);
        let twiddles = (0..n)
            .map(|k| Complex::from_polar(1.0, -PI * k as f64 / (2 * n) as f64))
            .collect();
        let scale = (0..n)
            .map(|k| if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() })
            .collect();
        Ok(Dct { fft, twiddles, scale })
    }

    pub fn len(&self) -> usize {
        self.scale.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scale.is_empty()
    }

    /// First `n_out` coefficients of the transform of `values`.
    pub fn transform(&self, values: &[f64], n_out: usize) -> Result<Vec<f64>> {
        let n = self.len();
        if values.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: values.len(),
            });
        }
        if n_out > n {
            return Err(Error::InvalidParameter(format!("{n_out} DCT outputs from {n} inputs")));
        }
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        for i in 0..n.div_ceil(2) {
            buf[i] = Complex::new(values[2 * i], 0.0);
        }
        for i in 0..n / 2 {
            buf[n - 1 - i] = Complex::new(values[2 * i + 1], 0.0);
        }
        self.fft.process(&mut buf);
        Ok((0..n_out)
            .map(|k| (buf[k] * self.twiddles[k]).re * self.scale[k])
            .collect())
    }
}

pub fn dct_ii(values: &[f64], n_out: usize) -> Result<Vec<f64>> {
    Dct::new(values.len())?.transform(values, n_out)
}

/// Lowest frequency mapped to a pitch class (A0).
pub const CHROMA_MIN_HZ: f64 = 27.5;

/// Pitch class of each FFT bin, `None` below [`CHROMA_MIN_HZ`]. Class 0 is A
/// (440 Hz reference).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChromaMap {
    classes: Vec<Option<u8>>,
}

impl ChromaMap {
    /// Map for a spectrum of `n_fft_bins` bins from an even-length FFT.
    pub fn new(sample_rate: u32, n_fft_bins: usize) -> Self {
        Self::for_frame(sample_rate, 2 * n_fft_bins.saturating_sub(1).max(1))
    }

    pub fn for_frame(sample_rate: u32, frame_len: usize) -> Self {
        let n_fft_bins = frame_len / 2 + 1;
        let bin_hz = sample_rate as f64 / frame_len as f64;
        let classes = (0..n_fft_bins)
            .map(|k| pitch_class(k as f64 * bin_hz))
            .collect();
        ChromaMap { classes }
    }

    pub fn class_of(&self, bin: usize) -> Option<u8> {
        self.classes.get(bin).copied().flatten()
    }

    pub fn classes(&self) -> &[Option<u8>] {
        &self.classes
    }
}

/// `round(12 * log2(f / 440)) mod 12`, or `None` below 27.5 Hz.
pub fn pitch_class(hz: f64) -> Option<u8> {
    if hz < CHROMA_MIN_HZ {
        return None;
    }
    let semis = (12.0 * (hz / 440.0).log2()).round() as i64;
    Some(semis.rem_euclid(12) as u8)
}

pub fn build_chroma_map(sample_rate: u32, n_fft_bins: usize) -> ChromaMap {
    ChromaMap::new(sample_rate, n_fft_bins)
}
