//! From a recorded performance to an analogy dataset.
//!
//! A performance WAV is segmented at detected onsets, each hit gets a full
//! feature vector and a set of onset features, a reference hit is chosen by
//! median transient loudness, and every other hit is described by its
//! feature difference `y` relative to that reference. Records are split
//! into train/val/test so that the held-out splits cover the dynamic range.

mod split;

pub use split::assign_splits;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{
    extract_feature_vector, FeatureVector, FrameConfig, OnsetFeatureExtractor, OnsetFeatures,
    FEATURE_COUNT, ONSET_FEATURE_COUNT,
};
use crate::onsets::{detect_onsets, OnsetConfig};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("need at least {need} usable hits, found {got}")]
    TooFewHits { got: usize, need: usize },
    #[error("onset feature {name} is constant on the train split; cannot normalize")]
    DegenerateNormalization { name: &'static str },
    #[error("invalid dataset config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Feature(#[from] crate::features::FeatureError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// One training example: the onset features of a hit plus its feature
/// difference relative to the reference hit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnalogyRecord {
    pub hit_id: usize,
    pub onset_features: OnsetFeatures,
    pub y: [f64; FEATURE_COUNT],
    pub split: Split,
}

/// Per-feature min/max collected on the train split only.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub min: [f64; ONSET_FEATURE_COUNT],
    pub max: [f64; ONSET_FEATURE_COUNT],
}

impl NormStats {
    /// `(x - min) / (max - min)`, clamped to `[0, 1]`.
    pub fn normalize(&self, raw: [f64; ONSET_FEATURE_COUNT]) -> [f64; ONSET_FEATURE_COUNT] {
        std::array::from_fn(|i| {
            ((raw[i] - self.min[i]) / (self.max[i] - self.min[i])).clamp(0.0, 1.0)
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub onset: OnsetConfig,
    pub frame: FrameConfig,
    pub onset_window: usize,
    pub hit_length_s: f64,
    pub val_frac: f64,
    pub test_frac: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            onset: OnsetConfig::default(),
            frame: FrameConfig::default(),
            onset_window: 256,
            hit_length_s: 0.5,
            val_frac: 0.1,
            test_frac: 0.1,
        }
    }
}

/// Everything needed to train and evaluate on one performance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub source: String,
    pub sample_rate: f64,
    pub onsets: Vec<usize>,
    pub reference_hit: usize,
    pub norm_stats: NormStats,
    pub records: Vec<AnalogyRecord>,
    pub frame_cfg: FrameConfig,
    pub onset_window: usize,
    pub hit_length_s: f64,
    /// Hits dropped because they were silent or degenerate.
    pub dropped: usize,
    /// Hits shorter than the analysis region that were zero-padded.
    pub padded: usize,
}

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

impl DatasetManifest {
    pub fn records_in(&self, split: Split) -> impl Iterator<Item = &AnalogyRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn save(&self, path: &std::path::Path) -> std::io::Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self).unwrap())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let manifest: Self =
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        if manifest.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(format!(
                "{}: manifest schema version {} (expected {MANIFEST_SCHEMA_VERSION})",
                path.display(),
                manifest.schema_version
            ));
        }
        Ok(manifest)
    }
}

/// Cut hits out of the signal: each hit starts at its onset, is truncated at
/// the next onset, and zero-padded to exactly `hit_len` samples.
pub fn slice_hits(signal: &[f64], onsets: &[usize], hit_len: usize) -> Vec<Vec<f64>> {
    onsets
        .iter()
        .enumerate()
        .map(|(i, &start)| {
            let natural_end = start + hit_len;
            let end = onsets
                .get(i + 1)
                .map_or(natural_end, |&next| natural_end.min(next))
                .min(signal.len());
            let mut hit = signal[start..end.max(start)].to_vec();
            hit.resize(hit_len, 0.0);
            hit
        })
        .collect()
}

/// Index of the hit whose transient loudness is the median (the lower
/// median when the count is even).
pub fn select_reference(transient_lkfs: &[f64]) -> Result<usize, DatasetError> {
    if transient_lkfs.len() < 3 {
        return Err(DatasetError::TooFewHits {
            got: transient_lkfs.len(),
            need: 3,
        });
    }
    let mut order: Vec<usize> = (0..transient_lkfs.len()).collect();
    order.sort_by(|&a, &b| {
        transient_lkfs[a]
            .partial_cmp(&transient_lkfs[b])
            .unwrap()
            .then(a.cmp(&b))
    });
    Ok(order[(order.len() - 1) / 2])
}

/// Run the full segmentation pipeline on one performance.
pub fn build_manifest(
    signal: &[f64],
    sample_rate: f64,
    cfg: &DatasetConfig,
    source: &str,
) -> Result<DatasetManifest, DatasetError> {
    cfg.onset
        .validate()
        .map_err(DatasetError::InvalidConfig)?;
    cfg.frame.validate()?;
    let hit_len = (cfg.hit_length_s * sample_rate).round() as usize;
    if hit_len < cfg.onset_window {
        return Err(DatasetError::InvalidConfig(format!(
            "hit length {hit_len} samples is shorter than the onset window {}",
            cfg.onset_window
        )));
    }

    let onsets = detect_onsets(signal, sample_rate, &cfg.onset);
    let hits = slice_hits(signal, &onsets, hit_len);

    // Full and onset features per hit; silent or degenerate hits drop out.
    struct HitFeatures {
        hit_id: usize,
        vector: FeatureVector,
        onset: OnsetFeatures,
        padded: bool,
    }
    let extracted: Vec<Option<HitFeatures>> = hits
        .par_iter()
        .enumerate()
        .map(|(hit_id, hit)| {
            let full = extract_feature_vector(hit, &cfg.frame, sample_rate).ok()?;
            let mut ex = OnsetFeatureExtractor::new(cfg.onset_window, sample_rate).ok()?;
            let onset = ex.compute(&hit[..cfg.onset_window]).ok()?;
            Some(HitFeatures {
                hit_id,
                vector: FeatureVector(std::array::from_fn(|i| full.features[i])),
                onset,
                padded: full.padded,
            })
        })
        .collect();

    let dropped = extracted.iter().filter(|e| e.is_none()).count();
    let kept: Vec<HitFeatures> = extracted.into_iter().flatten().collect();
    let padded = kept.iter().filter(|h| h.padded).count();

    let lkfs_t: Vec<f64> = kept.iter().map(|h| h.vector.lkfs_t()).collect();
    let reference_idx = select_reference(&lkfs_t)?;
    let reference = &kept[reference_idx];

    let splits = assign_splits(&lkfs_t, cfg.val_frac, cfg.test_frac, Some(reference_idx))
        .map_err(|got| DatasetError::TooFewHits { got, need: 10 })?;

    let records: Vec<AnalogyRecord> = kept
        .iter()
        .zip(&splits)
        .map(|(h, &split)| AnalogyRecord {
            hit_id: h.hit_id,
            onset_features: h.onset,
            y: h.vector.sub(&reference.vector),
            split,
        })
        .collect();

    let norm_stats = train_norm_stats(&records)?;

    Ok(DatasetManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        source: source.to_string(),
        sample_rate,
        onsets,
        reference_hit: reference.hit_id,
        norm_stats,
        records,
        frame_cfg: cfg.frame,
        onset_window: cfg.onset_window,
        hit_length_s: cfg.hit_length_s,
        dropped,
        padded,
    })
}

fn train_norm_stats(records: &[AnalogyRecord]) -> Result<NormStats, DatasetError> {
    let mut min = [f64::INFINITY; ONSET_FEATURE_COUNT];
    let mut max = [f64::NEG_INFINITY; ONSET_FEATURE_COUNT];
    for record in records.iter().filter(|r| r.split == Split::Train) {
        for (i, v) in record.onset_features.as_array().into_iter().enumerate() {
            min[i] = min[i].min(v);
            max[i] = max[i].max(v);
        }
    }
    const NAMES: [&str; 3] = ["rms", "spectral_centroid", "spectral_flatness"];
    for i in 0..ONSET_FEATURE_COUNT {
        if !(min[i] < max[i]) {
            return Err(DatasetError::DegenerateNormalization { name: NAMES[i] });
        }
    }
    Ok(NormStats { min, max })
}
