//! Seeded synthetic corpus of four audibly distinct clip classes, one per
//! quadrant, for smoke runs and end-to-end tests.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::{write_clip, AudioClip, WavEncoding, CANONICAL_SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::taxonomy::EmotionLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthClass {
    /// 110–220 Hz tone with 4–8 Hz amplitude tremolo.
    LowTremolo,
    /// Steady 1.5–3 kHz tone.
    HighTone,
    /// White-noise bursts over near silence.
    NoiseBurst,
    /// Linear sweep from a few hundred Hz up to 3–5 kHz.
    UpChirp,
}

impl SynthClass {
    pub const ALL: [SynthClass; 4] = [
        SynthClass::LowTremolo,
        SynthClass::HighTone,
        SynthClass::NoiseBurst,
        SynthClass::UpChirp,
    ];

    /// Emotion the class stands in for; each falls in a different quadrant.
    pub fn emotion(self) -> EmotionLabel {
        match self {
            SynthClass::LowTremolo => EmotionLabel::Sadness,
            SynthClass::HighTone => EmotionLabel::Joy,
            SynthClass::NoiseBurst => EmotionLabel::Anger,
            SynthClass::UpChirp => EmotionLabel::Relief,
        }
    }
}

/// Samples of one clip at `sample_rate`.
pub fn synth_samples<R: Rng>(class: SynthClass, seconds: f64, sample_rate: u32, rng: &mut R) -> Vec<f64> {
    let sr = sample_rate as f64;
    let n = (seconds * sr).round() as usize;
    let amp = rng.random_range(0.2..0.7);
    let phase = rng.random_range(0.0..2.0 * PI);
    let floor = 0.005;
    let mut out: Vec<f64> = match class {
        SynthClass::LowTremolo => {
            let f = rng.random_range(110.0..220.0);
            let rate = rng.random_range(4.0..8.0);
            let depth = rng.random_range(0.4..0.8);
            (0..n)
                .map(|i| {
                    let t = i as f64 / sr;
                    let env = 1.0 - depth * 0.5 * (1.0 + (2.0 * PI * rate * t).sin());
                    amp * env * (2.0 * PI * f * t + phase).sin()
                })
                .collect()
        }
        SynthClass::HighTone => {
            let f = rng.random_range(1500.0..3000.0);
            (0..n)
                .map(|i| amp * (2.0 * PI * f * i as f64 / sr + phase).sin())
                .collect()
        }
        SynthClass::NoiseBurst => {
            let mut s = vec![0.0; n];
            let bursts = rng.random_range(2..5);
            for _ in 0..bursts {
                let len = (rng.random_range(0.08..0.25) * sr) as usize;
                let start = rng.random_range(0..n.saturating_sub(len).max(1));
                for v in s.iter_mut().skip(start).take(len) {
                    *v = amp * rng.random_range(-1.0..1.0);
                }
            }
            s
        }
        SynthClass::UpChirp => {
            let f0 = rng.random_range(200.0..400.0);
            let f1 = rng.random_range(3000.0..5000.0);
            let k = (f1 - f0) / seconds;
            (0..n)
                .map(|i| {
                    let t = i as f64 / sr;
                    amp * (2.0 * PI * (f0 * t + 0.5 * k * t * t) + phase).sin()
                })
                .collect()
        }
    };
    for v in &mut out {
        *v += floor * rng.random_range(-1.0..1.0);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub clips_per_class: usize,
    pub singers: usize,
    pub min_seconds: f64,
    pub max_seconds: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            clips_per_class: 100,
            singers: 1,
            min_seconds: 1.0,
            max_seconds: 1.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthClip {
    pub singer: String,
    pub class: SynthClass,
    pub index: usize,
    pub clip: AudioClip,
}

/// Clips are dealt to singers `singer1..` round-robin within each class.
pub fn synth_corpus(spec: &SynthSpec) -> Result<Vec<SynthClip>> {
    if spec.singers == 0 || !(spec.min_seconds > 0.0 && spec.max_seconds >= spec.min_seconds) {
        return Err(Error::InvalidParameter(format!("bad synthetic corpus spec {spec:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(4 * spec.clips_per_class);
    for class in SynthClass::ALL {
        for index in 0..spec.clips_per_class {
            let seconds = if spec.max_seconds > spec.min_seconds {
                rng.random_range(spec.min_seconds..spec.max_seconds)
            } else {
                spec.min_seconds
            };
            let samples = synth_samples(class, seconds, CANONICAL_SAMPLE_RATE, &mut rng);
            let singer = format!("singer{}", index % spec.singers + 1);
            let name = format!("{singer}/{}/{index:04}.wav", class.emotion());
            out.push(SynthClip {
                singer,
                class,
                index,
                clip: AudioClip::new(samples, CANONICAL_SAMPLE_RATE, name)?,
            });
        }
    }
    Ok(out)
}

/// Writes the corpus as `root/<singer>/<emotion>/<index>.wav`, 16-bit PCM.
pub fn write_synth_dataset(root: &Path, spec: &SynthSpec) -> Result<usize> {
    let corpus = synth_corpus(spec)?;
    for c in &corpus {
        let dir = root.join(&c.singer).join(c.class.emotion().name());
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_clip(dir.join(format!("{:04}.wav", c.index)), &c.clip, WavEncoding::Int16)?;
    }
    Ok(corpus.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::scan_dataset;
    use crate::taxonomy::quadrant_of;

    #[test]
    fn one_class_per_quadrant() {
        let mut quads: Vec<_> = SynthClass::ALL.iter().map(|c| quadrant_of(c.emotion())).collect();
        quads.sort();
        quads.dedup();
        assert_eq!(quads.len(), 4);
    }

    #[test]
    fn corpus_is_seeded_and_bounded() {
        let spec = SynthSpec {
            clips_per_class: 3,
            singers: 2,
            ..Default::default()
        };
        let a = synth_corpus(&spec).unwrap();
        let b = synth_corpus(&spec).unwrap();
        assert_eq!(a.len(), 12);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.clip.samples(), y.clip.samples());
            assert!(x.clip.samples().iter().all(|s| s.abs() <= 1.0));
            assert!((1.0..=1.5).contains(&x.clip.duration()));
        }
        let c = synth_corpus(&SynthSpec { seed: 1, ..spec }).unwrap();
        assert_ne!(a[0].clip.samples(), c[0].clip.samples());
    }

    #[test]
    fn written_tree_scans_back() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec {
            clips_per_class: 2,
            singers: 2,
            ..Default::default()
        };
        assert_eq!(write_synth_dataset(dir.path(), &spec).unwrap(), 8);
        let manifest = scan_dataset(dir.path()).unwrap();
        assert_eq!(manifest.entries.len(), 8);
        assert_eq!(manifest.singers().len(), 2);
    }
}
