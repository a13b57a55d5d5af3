//! The 34 short-term features computed per frame.
//!
//! Layout of a [`FrameFeatureVector`]:
//!
//! | index | feature |
//! |-------|---------|
//! | 0 | zero crossing rate |
//! | 1 | energy |
//! | 2 | entropy of energy |
//! | 3 | spectral centroid (Hz) |
//! | 4 | spectral spread (Hz) |
//! | 5 | spectral entropy |
//! | 6 | spectral flux |
//! | 7 | spectral rolloff (Hz) |
//! | 8..21 | MFCC 1..13 |
//! | 21..33 | chroma 1..12 (class 0 = A) |
//! | 33 | chroma deviation |

use crate::dsp::{ChromaMap, Dct, MelFilterBank, Spectrum, SpectrumAnalyzer};
use crate::error::{Error, Result};

pub const N_FEATURES: usize = 34;
pub const N_MFCC: usize = 13;
pub const N_MEL_FILTERS: usize = 40;
pub const N_CHROMA: usize = 12;
pub const ENTROPY_SUBDIVISIONS: usize = 10;
pub const ROLLOFF_FRACTION: f64 = 0.90;
pub const LOG_FLOOR: f64 = 1e-10;

/// Snake-case names of the 34 features, in vector order.
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "zcr",
    "energy",
    "energy_entropy",
    "spectral_centroid",
    "spectral_spread",
    "spectral_entropy",
    "spectral_flux",
    "spectral_rolloff",
    "mfcc_1",
    "mfcc_2",
    "mfcc_3",
    "mfcc_4",
    "mfcc_5",
    "mfcc_6",
    "mfcc_7",
    "mfcc_8",
    "mfcc_9",
    "mfcc_10",
    "mfcc_11",
    "mfcc_12",
    "mfcc_13",
    "chroma_1",
    "chroma_2",
    "chroma_3",
    "chroma_4",
    "chroma_5",
    "chroma_6",
    "chroma_7",
    "chroma_8",
    "chroma_9",
    "chroma_10",
    "chroma_11",
    "chroma_12",
    "chroma_deviation",
];

pub type FrameFeatureVector = [f64; N_FEATURES];

/// Sign-change rate, with `sign(0)` treated as positive.
pub fn zcr(frame: &[f64]) -> f64 {
    if frame.len() < 2 {
        return 0.0;
    }
    let crossings = frame
        .windows(2)
        .filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0))
        .count();
    crossings as f64 / (frame.len() - 1) as f64
}

pub fn short_time_energy(frame: &[f64]) -> f64 {
    if frame.is_empty() {
        return 0.0;
    }
    frame.iter().map(|s| s * s).sum::<f64>() / frame.len() as f64
}

/// Base-2 Shannon entropy of `parts` after normalizing to a distribution;
/// a zero total yields the uniform distribution.
fn normalized_entropy(parts: &[f64]) -> f64 {
    let total: f64 = parts.iter().sum();
    if total <= 0.0 {
        return (parts.len() as f64).log2();
    }
    parts
        .iter()
        .map(|&p| p / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum()
}

/// Sums `values` over `n` contiguous equal blocks, dropping the remainder.
fn block_sums(values: impl ExactSizeIterator<Item = f64>, n: usize) -> Vec<f64> {
    let block = values.len() / n;
    let mut sums = vec![0.0; n];
    for (i, v) in values.take(block * n).enumerate() {
        sums[i / block] += v;
    }
    sums
}

pub fn energy_entropy(frame: &[f64], n_sub: usize) -> f64 {
    if n_sub == 0 || frame.len() < n_sub {
        return 0.0;
    }
    normalized_entropy(&block_sums(frame.iter().map(|s| s * s), n_sub))
}

/// Power-weighted mean frequency and standard deviation around it.
pub fn spectral_centroid_spread(spectrum: &Spectrum) -> (f64, f64) {
    let mut total = 0.0;
    let mut first = 0.0;
    for (k, w) in spectrum.power().enumerate() {
        total += w;
        first += spectrum.frequency(k) * w;
    }
    if total <= 0.0 {
        return (0.0, 0.0);
    }
    let centroid = first / total;
    let second: f64 = spectrum
        .power()
        .enumerate()
        .map(|(k, w)| (spectrum.frequency(k) - centroid).powi(2) * w)
        .sum();
    (centroid, (second / total).sqrt())
}

pub fn spectral_entropy(spectrum: &Spectrum, n_blocks: usize) -> f64 {
    if n_blocks == 0 || spectrum.len() < n_blocks {
        return 0.0;
    }
    normalized_entropy(&block_sums(spectrum.power(), n_blocks))
}

/// Euclidean distance between L1-normalized magnitude spectra.
pub fn spectral_flux(spectrum: &Spectrum, prev: &Spectrum) -> Result<f64> {
    if spectrum.len() != prev.len() {
        return Err(Error::DimensionMismatch {
            expected: prev.len(),
            actual: spectrum.len(),
        });
    }
    let norm = |s: &Spectrum| {
        let total: f64 = s.magnitudes().iter().sum();
        if total > 0.0 {
            total
        } else {
            1.0
        }
    };
    let (a, b) = (norm(spectrum), norm(prev));
    Ok(spectrum
        .magnitudes()
        .iter()
        .zip(prev.magnitudes())
        .map(|(m, p)| (m / a - p / b).powi(2))
        .sum::<f64>()
        .sqrt())
}

/// Lowest bin frequency whose cumulative power reaches `fraction` of the
/// total; 0 for a silent spectrum.
pub fn spectral_rolloff(spectrum: &Spectrum, fraction: f64) -> f64 {
    let total: f64 = spectrum.power().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let target = fraction * total;
    let mut cumulative = 0.0;
    for (k, p) in spectrum.power().enumerate() {
        cumulative += p;
        if cumulative >= target {
            return spectrum.frequency(k);
        }
    }
    spectrum.frequency(spectrum.len() - 1)
}

pub fn mfcc(spectrum: &Spectrum, bank: &MelFilterBank, dct: &Dct) -> Result<[f64; N_MFCC]> {
    if bank.n_fft_bins() != spectrum.len() {
        return Err(Error::DimensionMismatch {
            expected: bank.n_fft_bins(),
            actual: spectrum.len(),
        });
    }
    let power: Vec<f64> = spectrum.power().collect();
    let log_energies: Vec<f64> = bank.apply(&power).into_iter().map(|e| (e + LOG_FLOOR).ln()).collect();
    let coeffs = dct.transform(&log_energies, N_MFCC)?;
    let mut out = [0.0; N_MFCC];
    out.copy_from_slice(&coeffs);
    Ok(out)
}

/// Normalized pitch-class energies and their population standard deviation.
pub fn chroma_features(spectrum: &Spectrum, map: &ChromaMap) -> ([f64; N_CHROMA], f64) {
    let mut chroma = [0.0; N_CHROMA];
    for (k, p) in spectrum.power().enumerate() {
        if let Some(c) = map.class_of(k) {
            chroma[c as usize] += p;
        }
    }
    let total: f64 = chroma.iter().sum();
    if total > 0.0 {
        chroma.iter_mut().for_each(|c| *c /= total);
    }
    let mean = chroma.iter().sum::<f64>() / N_CHROMA as f64;
    let var = chroma.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / N_CHROMA as f64;
    (chroma, var.sqrt())
}

/// Precomputed transforms for one frame length and sample rate.
#[derive(Debug, Clone)]
pub struct FrameExtractor {
    analyzer: SpectrumAnalyzer,
    bank: MelFilterBank,
    dct: Dct,
    chroma: ChromaMap,
}

impl FrameExtractor {
    pub fn new(frame_len: usize, sample_rate: u32) -> Result<Self> {
        Ok(FrameExtractor {
            analyzer: SpectrumAnalyzer::new(frame_len, sample_rate)?,
            bank: MelFilterBank::for_frame(sample_rate, frame_len, N_MEL_FILTERS)?,
            dct: Dct::new(N_MEL_FILTERS)?,
            chroma: ChromaMap::for_frame(sample_rate, frame_len),
        })
    }

    pub fn frame_len(&self) -> usize {
        self.analyzer.frame_len()
    }

    pub fn spectrum(&self, frame: &[f64]) -> Result<Spectrum> {
        self.analyzer.magnitude_spectrum(frame)
    }

    /// Computes the 34 features of `frame`. `prev` is the previous frame's
    /// spectrum, or `None` for the first frame of a clip (flux 0). Returns
    /// this frame's spectrum for the next call.
    pub fn extract_frame(&self, frame: &[f64], prev: Option<&Spectrum>) -> Result<(FrameFeatureVector, Spectrum)> {
        let spectrum = self.spectrum(frame)?;
        let (centroid, spread) = spectral_centroid_spread(&spectrum);
        let flux = spectral_flux(&spectrum, prev.unwrap_or(&spectrum))?;
        let mfccs = mfcc(&spectrum, &self.bank, &self.dct)?;
        let (chroma, deviation) = chroma_features(&spectrum, &self.chroma);

        let mut v = [0.0; N_FEATURES];
        v[0] = zcr(frame);
        v[1] = short_time_energy(frame);
        v[2] = energy_entropy(frame, ENTROPY_SUBDIVISIONS);
        v[3] = centroid;
        v[4] = spread;
        v[5] = spectral_entropy(&spectrum, ENTROPY_SUBDIVISIONS);
        v[6] = flux;
        v[7] = spectral_rolloff(&spectrum, ROLLOFF_FRACTION);
        v[8..21].copy_from_slice(&mfccs);
        v[21..33].copy_from_slice(&chroma);
        v[33] = deviation;
        Ok((v, spectrum))
    }
}
