use std::ffi::{CStr, CString};
use std::f64::consts::PI;
use std::ptr;

use prosody::classifiers::train;
use prosody::{extract_clip, AggregationParams, AudioClip, EmotionLabel, Family, Hyperparams, LabeledSet};
use prosody_ffi::*;

fn tone(seconds: f64, sr: u32) -> Vec<f64> {
    let n = (seconds * sr as f64) as usize;
    (0..n)
        .map(|i| {
            let t = i as f64 / sr as f64;
            0.4 * (2.0 * PI * 220.0 * t).sin() + 0.1 * (2.0 * PI * 1800.0 * t).sin()
        })
        .collect()
}

/// Points on a small grid around each center; class = center index.
fn blobs(centers: &[Vec<f64>], per_class: usize) -> LabeledSet {
    let mut vectors = Vec::new();
    let mut labels = Vec::new();
    for (label, c) in centers.iter().enumerate() {
        for i in 0..per_class {
            let offset = (i as f64 / per_class as f64) - 0.5;
            vectors.push(c.iter().enumerate().map(|(d, v)| v + offset * (d as f64 + 1.0) * 0.3).collect());
            labels.push(label);
        }
    }
    LabeledSet::new(vectors, labels, centers.len()).unwrap()
}

fn last_error() -> String {
    let p = prosody_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn extract_samples_matches_library() {
    let samples = tone(1.3, 16_000);
    let mut out = vec![0.0; prosody_feature_count()];
    let status = unsafe { prosody_extract_samples(samples.as_ptr(), samples.len(), 16_000, out.as_mut_ptr(), out.len()) };
    assert_eq!(status, ProsodyStatus::Ok);
    assert!(prosody_last_error().is_null());
    let clip = AudioClip::new(samples, 16_000, "x").unwrap();
    let expected = extract_clip(&clip, &AggregationParams::default()).unwrap();
    assert_eq!(out, expected.values);
}

#[test]
fn extract_resamples_other_rates() {
    let samples = tone(1.0, 44_100);
    let mut out = vec![f64::NAN; 136];
    let status = unsafe { prosody_extract_samples(samples.as_ptr(), samples.len(), 44_100, out.as_mut_ptr(), 136) };
    assert_eq!(status, ProsodyStatus::Ok);
    assert!(out.iter().all(|v| v.is_finite()));
}

#[test]
fn extract_errors() {
    let samples = tone(1.0, 16_000);
    let mut out = vec![0.0; 136];
    let status = unsafe { prosody_extract_samples(samples.as_ptr(), samples.len(), 16_000, out.as_mut_ptr(), 135) };
    assert_eq!(status, ProsodyStatus::BufferTooSmall);
    assert!(last_error().contains("136"));

    let status = unsafe { prosody_extract_samples(ptr::null(), 10, 16_000, out.as_mut_ptr(), 136) };
    assert_eq!(status, ProsodyStatus::NullPointer);

    let short = tone(0.01, 16_000);
    let status = unsafe { prosody_extract_samples(short.as_ptr(), short.len(), 16_000, out.as_mut_ptr(), 136) };
    assert_eq!(status, ProsodyStatus::Audio);

    let status = unsafe { prosody_extract_samples(samples.as_ptr(), 0, 16_000, out.as_mut_ptr(), 136) };
    assert_eq!(status, ProsodyStatus::Audio);

    let status = unsafe { prosody_extract_samples(samples.as_ptr(), samples.len(), 0, out.as_mut_ptr(), 136) };
    assert_eq!(status, ProsodyStatus::InvalidArgument);
}

#[test]
fn extract_wav_and_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.wav");
    let clip = AudioClip::new(tone(1.2, 16_000), 16_000, "a").unwrap();
    prosody::audio::write_clip(&path, &clip, prosody::audio::WavEncoding::Float32).unwrap();
    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let mut out = vec![0.0; 136];
    assert_eq!(unsafe { prosody_extract_wav(c_path.as_ptr(), out.as_mut_ptr(), 136) }, ProsodyStatus::Ok);
    let reference = extract_clip(&prosody::audio::load_canonical(&path).unwrap(), &AggregationParams::default()).unwrap();
    assert_eq!(out, reference.values);

    let missing = CString::new(dir.path().join("none.wav").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { prosody_extract_wav(missing.as_ptr(), out.as_mut_ptr(), 136) }, ProsodyStatus::Io);
    assert!(last_error().contains("none.wav"));
}

#[test]
fn model_handle_lifecycle() {
    let centers = vec![vec![0.0, 0.0, 0.0], vec![5.0, 0.0, 0.0], vec![0.0, 5.0, 0.0]];
    let data = blobs(&centers, 20);
    let model = train(Family::LinearSvm, &data, &Hyperparams::default(), 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    model.save(&path).unwrap();

    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let mut handle = ptr::null_mut();
    assert_eq!(unsafe { prosody_model_load(c_path.as_ptr(), &mut handle) }, ProsodyStatus::Ok);
    assert!(!handle.is_null());
    unsafe {
        assert_eq!(prosody_model_class_count(handle), 3);
        assert_eq!(prosody_model_feature_count(handle), 3);
    }

    for x in data.vectors() {
        let mut code = usize::MAX;
        let status = unsafe { prosody_model_predict(handle, x.as_ptr(), x.len(), &mut code) };
        assert_eq!(status, ProsodyStatus::Ok);
        assert_eq!(code, model.predict(x).unwrap());
        let mut scores = [0.0; 3];
        let status = unsafe { prosody_model_scores(handle, x.as_ptr(), x.len(), scores.as_mut_ptr(), 3) };
        assert_eq!(status, ProsodyStatus::Ok);
        assert_eq!(scores.to_vec(), model.scores(x).unwrap());
    }

    let x = [1.0, 2.0];
    let mut code = 0;
    let status = unsafe { prosody_model_predict(handle, x.as_ptr(), 2, &mut code) };
    assert_eq!(status, ProsodyStatus::DimensionMismatch);
    let mut small = [0.0; 2];
    let y = [1.0, 2.0, 3.0];
    let status = unsafe { prosody_model_scores(handle, y.as_ptr(), 3, small.as_mut_ptr(), 2) };
    assert_eq!(status, ProsodyStatus::BufferTooSmall);

    let json = CString::new(model.to_json().unwrap()).unwrap();
    let mut second = ptr::null_mut();
    assert_eq!(unsafe { prosody_model_from_json(json.as_ptr(), &mut second) }, ProsodyStatus::Ok);
    unsafe {
        prosody_model_free(second);
        prosody_model_free(handle);
        prosody_model_free(ptr::null_mut());
    }
}

#[test]
fn model_errors() {
    let bad = CString::new("{\"not\": \"a model\"}").unwrap();
    let mut handle = ptr::dangling_mut::<ProsodyModel>();
    assert_eq!(unsafe { prosody_model_from_json(bad.as_ptr(), &mut handle) }, ProsodyStatus::Model);
    assert!(handle.is_null());
    assert!(!last_error().is_empty());

    let c_path = CString::new("/nonexistent/model.json").unwrap();
    assert_eq!(unsafe { prosody_model_load(c_path.as_ptr(), &mut handle) }, ProsodyStatus::Io);
    assert_eq!(unsafe { prosody_model_load(c_path.as_ptr(), ptr::null_mut()) }, ProsodyStatus::NullPointer);
    unsafe {
        assert_eq!(prosody_model_class_count(ptr::null()), 0);
        let mut code = 0;
        assert_eq!(prosody_model_predict(ptr::null(), [0.0].as_ptr(), 1, &mut code), ProsodyStatus::NullPointer);
    }
}

#[test]
fn taxonomy_lookups() {
    for e in EmotionLabel::ALL {
        let name = unsafe { CStr::from_ptr(prosody_emotion_name(e.code())) };
        assert_eq!(name.to_str().unwrap(), e.name());
        let lower = CString::new(e.name().to_lowercase()).unwrap();
        let mut code = usize::MAX;
        assert_eq!(unsafe { prosody_emotion_code(lower.as_ptr(), &mut code) }, ProsodyStatus::Ok);
        assert_eq!(code, e.code());
        let mut q = usize::MAX;
        assert_eq!(unsafe { prosody_quadrant_of(e.code(), &mut q) }, ProsodyStatus::Ok);
        assert_eq!(q, prosody::quadrant_of(e).code());
        let qname = unsafe { CStr::from_ptr(prosody_quadrant_name(q)) };
        assert_eq!(qname.to_str().unwrap(), prosody::quadrant_of(e).name());
    }
    assert!(prosody_emotion_name(20).is_null());
    assert!(prosody_quadrant_name(4).is_null());
    let mut q = 0;
    assert_eq!(unsafe { prosody_quadrant_of(20, &mut q) }, ProsodyStatus::InvalidArgument);
    let boredom = CString::new("Boredom").unwrap();
    assert_eq!(unsafe { prosody_emotion_code(boredom.as_ptr(), &mut q) }, ProsodyStatus::InvalidArgument);
    assert!(last_error().contains("Boredom"));
}
