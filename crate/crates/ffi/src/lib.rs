//! C ABI over the prosody pipeline: feature extraction from samples or WAV
//! files, loading and querying persisted models, and the emotion taxonomy.
//!
//! Every fallible function returns a [`ProsodyStatus`]. On failure a
//! description is kept per thread and can be read with
//! [`prosody_last_error`]. Models are opaque [`ProsodyModel`] handles owned
//! by the caller and released with [`prosody_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::sync::LazyLock;

use prosody::aggregation::N_AGGREGATE;
use prosody::audio::{load_canonical, CANONICAL_SAMPLE_RATE};
use prosody::{extract_clip, resample, AggregationParams, AudioClip, EmotionLabel, Error, Quadrant, TrainedModel};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProsodyStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    Io = 4,
    Audio = 5,
    Model = 6,
    DimensionMismatch = 7,
    Data = 8,
    Panic = 9,
}

/// Opaque handle to a trained classifier.
pub struct ProsodyModel {
    inner: TrainedModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: ProsodyStatus, message: impl Into<String>) -> ProsodyStatus {
    set_last_error(message.into());
    status
}

fn status_of(err: &Error) -> ProsodyStatus {
    match err {
        Error::Io { .. } => ProsodyStatus::Io,
        Error::UnsupportedAudio { .. }
        | Error::EmptyAudio { .. }
        | Error::DurationOutOfRange { .. }
        | Error::ClipTooShort { .. } => ProsodyStatus::Audio,
        Error::InvalidParameter(_) | Error::UnknownLabel { .. } => ProsodyStatus::InvalidArgument,
        Error::DimensionMismatch { .. } => ProsodyStatus::DimensionMismatch,
        Error::Model(_) | Error::Json(_) => ProsodyStatus::Model,
        _ => ProsodyStatus::Data,
    }
}

fn guard(f: impl FnOnce() -> Result<(), ProsodyStatus>) -> ProsodyStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ProsodyStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(ProsodyStatus::Panic, format!("internal error: {msg}"))
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, ProsodyStatus>;
}

impl<T> OrStatus<T> for prosody::Result<T> {
    fn or_status(self) -> Result<T, ProsodyStatus> {
        self.map_err(|e| fail(status_of(&e), e.to_string()))
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), ProsodyStatus> {
    if p.is_null() {
        Err(fail(ProsodyStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, ProsodyStatus> {
    non_null(path, "path")?;
    let s = CStr::from_ptr(path)
        .to_str()
        .map_err(|_| fail(ProsodyStatus::InvalidArgument, "path is not valid UTF-8"))?;
    Ok(PathBuf::from(s))
}

unsafe fn write_features(clip: &AudioClip, out: *mut f64, out_len: usize) -> Result<(), ProsodyStatus> {
    non_null(out, "out")?;
    if out_len < N_AGGREGATE {
        return Err(fail(
            ProsodyStatus::BufferTooSmall,
            format!("output holds {out_len} values, {N_AGGREGATE} needed"),
        ));
    }
    let v = extract_clip(clip, &AggregationParams::default()).or_status()?;
    std::slice::from_raw_parts_mut(out, N_AGGREGATE).copy_from_slice(&v.values);
    Ok(())
}

/// Length of a clip feature vector (136).
#[no_mangle]
pub extern "C" fn prosody_feature_count() -> usize {
    N_AGGREGATE
}

/// Message for the last failed call on this thread, or null if the last
/// call succeeded. Valid until the next call into the library on the same
/// thread.
#[no_mangle]
pub extern "C" fn prosody_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Extracts the clip vector from `n_samples` mono samples in `[-1, 1]` at
/// `sample_rate` Hz, using the default window settings. Audio at other
/// rates is resampled to 16 kHz first. `out` must hold at least
/// [`prosody_feature_count`] values.
///
/// # Safety
/// `samples` must point to `n_samples` readable doubles and `out` to
/// `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn prosody_extract_samples(
    samples: *const f64,
    n_samples: usize,
    sample_rate: u32,
    out: *mut f64,
    out_len: usize,
) -> ProsodyStatus {
    guard(|| {
        non_null(samples, "samples")?;
        let input = std::slice::from_raw_parts(samples, n_samples).to_vec();
        let clip = AudioClip::new(input, sample_rate, "<samples>").or_status()?;
        let clip = resample(&clip, CANONICAL_SAMPLE_RATE).or_status()?;
        write_features(&clip, out, out_len)
    })
}

/// Like [`prosody_extract_samples`], reading a PCM WAV file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` must point to
/// `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn prosody_extract_wav(path: *const c_char, out: *mut f64, out_len: usize) -> ProsodyStatus {
    guard(|| {
        let path = path_arg(path)?;
        let clip = load_canonical(&path).or_status()?;
        write_features(&clip, out, out_len)
    })
}

/// Loads a model saved by the command-line tool. On success `*model`
/// receives a handle to release with [`prosody_model_free`].
///
/// # Safety
/// `path` must be a NUL-terminated string and `model` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn prosody_model_load(path: *const c_char, model: *mut *mut ProsodyModel) -> ProsodyStatus {
    guard(|| {
        non_null(model, "model")?;
        *model = ptr::null_mut();
        let path = path_arg(path)?;
        let inner = TrainedModel::load(&path, None).or_status()?;
        *model = Box::into_raw(Box::new(ProsodyModel { inner }));
        Ok(())
    })
}

/// Parses a model from its JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `model` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn prosody_model_from_json(json: *const c_char, model: *mut *mut ProsodyModel) -> ProsodyStatus {
    guard(|| {
        non_null(model, "model")?;
        *model = ptr::null_mut();
        non_null(json, "json")?;
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| fail(ProsodyStatus::InvalidArgument, "model text is not valid UTF-8"))?;
        let inner = TrainedModel::from_json(text, None).or_status()?;
        *model = Box::into_raw(Box::new(ProsodyModel { inner }));
        Ok(())
    })
}

/// Releases a model handle. Null is ignored.
///
/// # Safety
/// `model` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn prosody_model_free(model: *mut ProsodyModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of classes the model predicts, 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn prosody_model_class_count(model: *const ProsodyModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.class_count)
}

/// Input length the model expects, 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn prosody_model_feature_count(model: *const ProsodyModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.feature_count)
}

/// Predicts the class code for one feature vector.
///
/// # Safety
/// `model` must be a live handle, `features` must point to `n_features`
/// readable doubles and `class_code` must be writable.
#[no_mangle]
pub unsafe extern "C" fn prosody_model_predict(
    model: *const ProsodyModel,
    features: *const f64,
    n_features: usize,
    class_code: *mut usize,
) -> ProsodyStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(features, "features")?;
        non_null(class_code, "class_code")?;
        let x = std::slice::from_raw_parts(features, n_features);
        *class_code = (*model).inner.predict(x).or_status()?;
        Ok(())
    })
}

/// Writes the per-class scores for one feature vector into `scores`, which
/// must hold at least [`prosody_model_class_count`] values.
///
/// # Safety
/// As for [`prosody_model_predict`]; `scores` must point to `scores_len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn prosody_model_scores(
    model: *const ProsodyModel,
    features: *const f64,
    n_features: usize,
    scores: *mut f64,
    scores_len: usize,
) -> ProsodyStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(features, "features")?;
        non_null(scores, "scores")?;
        let m = &(*model).inner;
        if scores_len < m.class_count {
            return Err(fail(
                ProsodyStatus::BufferTooSmall,
                format!("score buffer holds {scores_len} values, {} needed", m.class_count),
            ));
        }
        let s = m.scores(std::slice::from_raw_parts(features, n_features)).or_status()?;
        std::slice::from_raw_parts_mut(scores, s.len()).copy_from_slice(&s);
        Ok(())
    })
}

fn c_names(names: impl Iterator<Item = &'static str>) -> Vec<CString> {
    names.map(|n| CString::new(n).unwrap()).collect()
}

static EMOTION_NAMES: LazyLock<Vec<CString>> = LazyLock::new(|| c_names(EmotionLabel::ALL.iter().map(|e| e.name())));
static QUADRANT_NAMES: LazyLock<Vec<CString>> = LazyLock::new(|| c_names(Quadrant::ALL.iter().map(|q| q.name())));

/// Name of emotion `code` (0..20), or null when out of range. The string is
/// static.
#[no_mangle]
pub extern "C" fn prosody_emotion_name(code: usize) -> *const c_char {
    EMOTION_NAMES.get(code).map_or(ptr::null(), |s| s.as_ptr())
}

/// Name of quadrant `code` (0..4), or null when out of range.
#[no_mangle]
pub extern "C" fn prosody_quadrant_name(code: usize) -> *const c_char {
    QUADRANT_NAMES.get(code).map_or(ptr::null(), |s| s.as_ptr())
}

/// Parses an emotion name, case-insensitively, into its code.
///
/// # Safety
/// `name` must be a NUL-terminated string and `code` writable.
#[no_mangle]
pub unsafe extern "C" fn prosody_emotion_code(name: *const c_char, code: *mut usize) -> ProsodyStatus {
    guard(|| {
        non_null(name, "name")?;
        non_null(code, "code")?;
        let text = CStr::from_ptr(name).to_string_lossy();
        *code = prosody::taxonomy::parse_label(&text).or_status()?.code();
        Ok(())
    })
}

/// Quadrant code of emotion `emotion_code`.
///
/// # Safety
/// `quadrant_code` must be writable.
#[no_mangle]
pub unsafe extern "C" fn prosody_quadrant_of(emotion_code: usize, quadrant_code: *mut usize) -> ProsodyStatus {
    guard(|| {
        non_null(quadrant_code, "quadrant_code")?;
        let e = EmotionLabel::from_code(emotion_code).ok_or_else(|| {
            fail(
                ProsodyStatus::InvalidArgument,
                format!("emotion code {emotion_code} out of range"),
            )
        })?;
        *quadrant_code = prosody::quadrant_of(e).code();
        Ok(())
    })
}
