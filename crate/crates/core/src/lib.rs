//! Emotion classification of short sung phrases from prosodic features.
//!
//! The pipeline runs WAV decoding ([`audio`]), 34 short-term features per
//! 50 ms frame ([`features`], built on [`dsp`]), aggregation into a
//! 136-value clip vector ([`aggregation`]), and six classifier families
//! ([`classifiers`]) evaluated under the 20-emotion and four-quadrant
//! taxonomies ([`taxonomy`], [`evaluation`]). [`selection`] ranks the
//! aggregate features by greedy forward selection.

pub mod aggregation;
pub mod audio;
pub mod cache;
pub mod classifiers;
pub mod cli;
pub mod dsp;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod selection;
pub mod synth;
pub mod taxonomy;

pub use aggregation::{extract_clip, AggregationParams, ClipFeatureVector};
pub use audio::{load_clip, resample, scan_dataset, AudioClip, DatasetManifest};
pub use classifiers::{Family, Hyperparams, LabeledSet, TrainedModel};
pub use error::{Error, Result};
pub use taxonomy::{quadrant_of, EmotionLabel, Quadrant};
