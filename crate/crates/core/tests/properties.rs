//! Randomized invariants over the public API.

use std::f64::consts::{PI, TAU};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use prosody::aggregation::{extract_clip, AggregationParams, N_AGGREGATE};
use prosody::audio::{load_clip, resample, write_clip, AudioClip, WavEncoding};
use prosody::classifiers::{argmax, train, Family, FfnnConfig, Hyperparams, LabeledSet};
use prosody::evaluation::{evaluate, Metrics};
use prosody::features::{FrameExtractor, N_FEATURES};

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 24,
        ..ProptestConfig::default()
    }
}

fn sines(components: &[(f64, f64, f64)], n: usize, sr: u32) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let t = i as f64 / sr as f64;
            components.iter().map(|&(a, f, p)| a * (2.0 * PI * f * t + p).sin()).sum()
        })
        .collect()
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Gaussian-ish blobs in `d` dimensions with per-column scales spread over
/// several orders of magnitude.
fn random_set(n_per_class: usize, classes: usize, d: usize, seed: u64) -> LabeledSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..d).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect();
    let scales: Vec<f64> = (0..d).map(|_| 10f64.powf(rng.random_range(-2.0..2.0))).collect();
    let mut vectors = Vec::new();
    let mut labels = Vec::new();
    for (label, c) in centers.iter().enumerate() {
        for _ in 0..n_per_class {
            vectors.push(
                c.iter()
                    .zip(&scales)
                    .map(|(m, s)| (m + rng.random_range(-1.5..1.5)) * s)
                    .collect(),
            );
            labels.push(label);
        }
    }
    LabeledSet::new(vectors, labels, classes).unwrap()
}

fn quick_hyper() -> Hyperparams {
    Hyperparams {
        knn_k: 3,
        n_trees: 15,
        n_stages: 15,
        ffnn: FfnnConfig {
            epochs: 10,
            ..Default::default()
        },
        ..Default::default()
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn wav_round_trip_within_one_step(
        seed in any::<u64>(),
        len in 3_200usize..6_000,
        depth in 0usize..4,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let clip = AudioClip::new(samples, 16_000, "x").unwrap();
        let (encoding, step) = [
            (WavEncoding::Int8, 1.0 / 128.0),
            (WavEncoding::Int16, 1.0 / 32_768.0),
            (WavEncoding::Int24, 1.0 / 8_388_608.0),
            (WavEncoding::Float32, 1e-7),
        ][depth];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        write_clip(&path, &clip, encoding).unwrap();
        let back = load_clip(&path).unwrap();
        prop_assert_eq!(back.samples().len(), len);
        for (a, b) in clip.samples().iter().zip(back.samples()) {
            prop_assert!((a - b).abs() <= step, "{} vs {} at step {}", a, b, step);
        }
    }

    #[test]
    fn resample_round_trip_correlates(
        rates in prop::sample::select(vec![(48_000u32, 16_000u32), (44_100, 16_000), (16_000, 44_100), (22_050, 16_000), (8_000, 16_000)]),
        parts in prop::collection::vec((0.05f64..0.5, 0.02f64..1.0, 0.0f64..TAU), 1..4),
    ) {
        let (sr, other) = rates;
        let nyquist = sr.min(other) as f64 / 2.0;
        let low: Vec<_> = parts.iter().map(|&(a, f, p)| (a, 0.2 * f * nyquist, p)).collect();
        let high: Vec<_> = parts.iter().map(|&(a, f, p)| (a, 0.4 * f * nyquist, p)).collect();
        for (components, floor) in [(low, 0.999), (high, 0.99)] {
            let x = sines(&components, sr as usize / 2, sr);
            let clip = AudioClip::new(x.clone(), sr, "x").unwrap();
            let there = resample(&clip, other).unwrap();
            prop_assert!((there.duration() - clip.duration()).abs() <= 1.0 / other as f64);
            let back = resample(&there, sr).unwrap();
            let r = correlation(&x, back.samples());
            prop_assert!(r > floor, "correlation {} below {}", r, floor);
        }
    }

    #[test]
    fn gain_covariance_of_frame_features(seed in any::<u64>(), gain in 0.25f64..4.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ex = FrameExtractor::new(800, 16_000).unwrap();
        let f0 = rng.random_range(100.0..3_000.0);
        let frame = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..800)
                .map(|i| 0.2 * (2.0 * PI * f0 * i as f64 / 16_000.0).sin() + 0.05 * rng.random_range(-1.0..1.0))
                .collect()
        };
        let (a, b) = (frame(&mut rng), frame(&mut rng));
        let scale = |v: &[f64]| v.iter().map(|s| s * gain).collect::<Vec<_>>();
        let (_, prev) = ex.extract_frame(&a, None).unwrap();
        let (x, _) = ex.extract_frame(&b, Some(&prev)).unwrap();
        let (_, prev_g) = ex.extract_frame(&scale(&a), None).unwrap();
        let (y, _) = ex.extract_frame(&scale(&b), Some(&prev_g)).unwrap();
        prop_assert!(x.iter().chain(&y).all(|v| v.is_finite()));
        let close = |p: f64, q: f64| (p - q).abs() <= 1e-6 * p.abs().max(1.0);
        for i in (0..N_FEATURES).filter(|&i| i != 1 && i != 8) {
            prop_assert!(close(x[i], y[i]), "feature {} moved: {} vs {}", i, x[i], y[i]);
        }
        prop_assert!(close(y[1], gain * gain * x[1]));
        let shift = 40f64.sqrt() * (gain * gain).ln();
        prop_assert!((y[8] - x[8] - shift).abs() < 1e-6, "mfcc_1 shift {} vs {}", y[8] - x[8], shift);
    }

    #[test]
    fn clip_vector_always_has_136_values(seed in any::<u64>(), seconds in 1.0f64..3.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = (seconds * 16_000.0) as usize;
        let samples: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
        let v = extract_clip(&AudioClip::new(samples, 16_000, "x").unwrap(), &AggregationParams::default()).unwrap();
        prop_assert_eq!(v.values.len(), N_AGGREGATE);
        prop_assert_eq!(N_AGGREGATE, 2 * 2 * N_FEATURES);
        prop_assert!(v.values.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn shifting_by_whole_periods_is_invisible(period in 20usize..400, periods in 1usize..20, amp in 0.1f64..0.9) {
        let sr = 16_000;
        let f = sr as f64 / period as f64;
        let shift = period * periods;
        let make = |offset: usize| -> Vec<f64> {
            (0..sr as usize)
                .map(|i| {
                    let t = (i + offset) as f64 / sr as f64;
                    amp * (2.0 * PI * f * t).sin() + 0.3 * amp * (4.0 * PI * f * t).cos()
                })
                .collect()
        };
        let p = AggregationParams::default();
        let a = extract_clip(&AudioClip::new(make(0), sr, "a").unwrap(), &p).unwrap();
        let b = extract_clip(&AudioClip::new(make(shift), sr, "b").unwrap(), &p).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn self_concatenation_keeps_frame_local_means(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let one: Vec<f64> = (0..16_000)
            .map(|i| 0.3 * (2.0 * PI * 440.0 * i as f64 / 16_000.0).sin() + 0.1 * rng.random_range(-1.0..1.0))
            .collect();
        let two: Vec<f64> = one.iter().chain(&one).copied().collect();
        let p = AggregationParams::default();
        let a = extract_clip(&AudioClip::new(one, 16_000, "a").unwrap(), &p).unwrap();
        let b = extract_clip(&AudioClip::new(two, 16_000, "b").unwrap(), &p).unwrap();
        // Spectral flux and the delta rows look one frame back, so the seam
        // between the copies changes them; every other base row is frame-local.
        for i in (0..N_FEATURES).filter(|&i| i != 6) {
            prop_assert!((a.values[i] - b.values[i]).abs() <= 1e-6 * a.values[i].abs().max(1.0), "row {}", i);
        }
    }

    #[test]
    fn metrics_from_confusion_equal_streamed(seed in any::<u64>(), n in 1usize..200, k in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let predicted: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let streamed = Metrics::from_predictions(&truth, &predicted, k).unwrap();
        let mut confusion = vec![vec![0; k]; k];
        for (&t, &p) in truth.iter().zip(&predicted) {
            confusion[t][p] += 1;
        }
        prop_assert_eq!(Metrics::from_confusion(confusion).unwrap(), streamed);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn column_scale_leaves_knn_and_svm_predictions(seed in any::<u64>(), column in 0usize..5, factor in 0.01f64..100.0) {
        let data = random_set(20, 3, 5, seed);
        let test = random_set(10, 3, 5, seed ^ 1);
        let rescale = |s: &LabeledSet| {
            let v = s.vectors().iter().map(|x| {
                let mut x = x.clone();
                x[column] *= factor;
                x
            }).collect();
            LabeledSet::new(v, s.labels().to_vec(), s.class_count()).unwrap()
        };
        for family in [Family::Knn, Family::LinearSvm] {
            let a = train(family, &data, &quick_hyper(), seed).unwrap();
            let b = train(family, &rescale(&data), &quick_hyper(), seed).unwrap();
            prop_assert_eq!(a.predict_all(test.vectors()).unwrap(), b.predict_all(rescale(&test).vectors()).unwrap());
        }
    }

    #[test]
    fn score_offsets_leave_argmax(seed in any::<u64>(), offset in -1e3f64..1e3) {
        let data = random_set(15, 4, 4, seed);
        for family in [Family::LinearSvm, Family::GradientBoosting, Family::Ffnn] {
            let model = train(family, &data, &quick_hyper(), seed).unwrap();
            for x in data.vectors() {
                let shifted: Vec<f64> = model.scores(x).unwrap().iter().map(|s| s + offset).collect();
                prop_assert_eq!(argmax(&shifted), model.predict(x).unwrap());
            }
        }
    }
}

/// Every family goes through the same train / evaluate / persist path.
#[test]
fn families_share_one_harness() {
    let data = random_set(15, 3, 6, 21);
    let test = random_set(8, 3, 6, 22);
    for family in Family::ALL {
        let model = train(family, &data, &quick_hyper(), 5).unwrap();
        assert_eq!(model.family, family);
        assert_eq!(model.class_count, 3);
        let metrics = evaluate(&model, &test).unwrap();
        assert_eq!(metrics.confusion.iter().flatten().sum::<usize>(), test.len());
        assert!((0.0..=100.0).contains(&metrics.accuracy));
        let predictions = model.predict_all(test.vectors()).unwrap();
        assert!(predictions.iter().all(|&p| p < 3));
        let reloaded = prosody::TrainedModel::from_json(&model.to_json().unwrap(), Some(6)).unwrap();
        assert_eq!(reloaded, model);
        assert_eq!(reloaded.predict_all(test.vectors()).unwrap(), predictions);
        assert!(prosody::TrainedModel::from_json(&model.to_json().unwrap(), Some(7)).is_err());
    }
}
