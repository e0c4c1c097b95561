//! Frame-based audio features with transient/sustain segmentation and
//! psychophysical scaling.
//!
//! A hit is summarized by seven scaled values: K-weighted loudness, spectral
//! centroid and spectral flatness over a short transient segment and a
//! longer sustain segment, plus a temporal centroid over the whole hit. The
//! extraction is generic over the autodiff field, so rendering with dual
//! numbers yields feature gradients with respect to synthesizer parameters.

mod loudness;
mod onset;
mod scaling;
mod stft;

pub use loudness::{k_weighting_coefficients, lkfs};
pub use onset::{onset_features, OnsetFeatureExtractor, OnsetFeatures, ONSET_FEATURE_COUNT};
pub use scaling::{scale_spectral_centroid, scale_spectral_flatness, scale_temporal_centroid};
pub use stft::{
    magnitude_frames, mean_spectral_centroid, mean_spectral_flatness, window, WindowKind,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::Scalar;

pub const FEATURE_COUNT: usize = 7;

/// Feature-vector component names, in storage order.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] =
    ["lkfs_t", "lkfs_s", "sc_t", "sc_s", "sf_t", "sf_s", "tc"];

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("silent segment: no spectral energy to summarize")]
    SilentSegment,
    #[error("empty signal")]
    EmptySignal,
    #[error("onset buffer length {got} does not match configured window {want}")]
    WrongBufferLength { got: usize, want: usize },
    #[error("invalid feature config: {0}")]
    InvalidConfig(String),
}

/// Analysis geometry. Defaults follow the frame layout used throughout the
/// crate: 46.4 ms flat-top windows with 75% overlap, a 125 ms temporal
/// centroid window, and a 2-frame transient / 8-frame sustain split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameConfig {
    pub window_ms: f64,
    pub overlap: f64,
    pub tc_window_ms: f64,
    pub n_transient_frames: usize,
    pub n_sustain_frames: usize,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            window_ms: 46.4,
            overlap: 0.75,
            tc_window_ms: 125.0,
            n_transient_frames: 2,
            n_sustain_frames: 8,
        }
    }
}

impl FrameConfig {
    pub fn validate(&self) -> Result<(), FeatureError> {
        if !(self.overlap > 0.0 && self.overlap < 1.0) {
            return Err(FeatureError::InvalidConfig(format!(
                "overlap {} outside (0, 1)",
                self.overlap
            )));
        }
        if self.window_ms <= 0.0 || self.tc_window_ms <= 0.0 {
            return Err(FeatureError::InvalidConfig(
                "window sizes must be positive".into(),
            ));
        }
        if self.n_transient_frames < 1 || self.n_sustain_frames < 1 {
            return Err(FeatureError::InvalidConfig(
                "frame counts must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn frame_len(&self, sample_rate: f64) -> usize {
        (self.window_ms * sample_rate / 1000.0).round() as usize
    }

    pub fn hop(&self, sample_rate: f64) -> usize {
        (self.frame_len(sample_rate) as f64 * (1.0 - self.overlap)).round() as usize
    }

    pub fn fft_size(&self, sample_rate: f64) -> usize {
        self.frame_len(sample_rate).next_power_of_two()
    }

    pub fn tc_window_len(&self, sample_rate: f64) -> usize {
        (self.tc_window_ms * sample_rate / 1000.0).round() as usize
    }

    /// Sample range covered by the transient frames `[0, n_t)`.
    pub fn transient_range(&self, sample_rate: f64) -> std::ops::Range<usize> {
        let end = (self.n_transient_frames - 1) * self.hop(sample_rate) + self.frame_len(sample_rate);
        0..end
    }

    /// Sample range covered by the sustain frames `[n_t, n_t + n_s)`.
    pub fn sustain_range(&self, sample_rate: f64) -> std::ops::Range<usize> {
        let hop = self.hop(sample_rate);
        let start = self.n_transient_frames * hop;
        let end =
            (self.n_transient_frames + self.n_sustain_frames - 1) * hop + self.frame_len(sample_rate);
        start..end
    }

    /// Shortest signal the extractor accepts without zero-padding.
    pub fn min_samples(&self, sample_rate: f64) -> usize {
        self.sustain_range(sample_rate)
            .end
            .max(self.tc_window_len(sample_rate))
    }
}

/// The seven scaled feature values of one hit, ordered as [`FEATURE_NAMES`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub [f64; FEATURE_COUNT]);

impl FeatureVector {
    pub fn lkfs_t(&self) -> f64 {
        self.0[0]
    }

    pub fn sub(&self, other: &FeatureVector) -> [f64; FEATURE_COUNT] {
        std::array::from_fn(|i| self.0[i] - other.0[i])
    }
}

/// Extraction result; `padded` flags hits that were shorter than the
/// analysis region and were zero-extended.
#[derive(Clone, Debug)]
pub struct Extraction<T> {
    pub features: [T; FEATURE_COUNT],
    pub padded: bool,
}

impl Extraction<f64> {
    pub fn vector(&self) -> FeatureVector {
        FeatureVector(self.features)
    }
}

/// Raw temporal centroid in seconds: the RMS-energy-weighted mean of window
/// center times, over 125 ms windows with 75% overlap.
pub fn temporal_centroid_raw<T: Scalar>(
    signal: &[T],
    cfg: &FrameConfig,
    sample_rate: f64,
) -> Result<T, FeatureError> {
    let window = cfg.tc_window_len(sample_rate);
    if signal.len() < window {
        return Err(FeatureError::InvalidConfig(format!(
            "signal shorter than one temporal-centroid window ({} < {window})",
            signal.len()
        )));
    }
    let hop = (window as f64 * (1.0 - cfg.overlap)).round().max(1.0) as usize;

    let mut weighted = T::zero();
    let mut total = T::zero();
    let mut start = 0;
    while start + window <= signal.len() {
        let mut sum_sq = T::zero();
        for &x in &signal[start..start + window] {
            sum_sq = sum_sq + x * x;
        }
        let mean_sq = sum_sq.scale(1.0 / window as f64);
        // A window of exact zeros contributes nothing (sqrt is not
        // differentiable at zero, so take the zero subgradient).
        let rms = if mean_sq.value() == 0.0 {
            T::zero()
        } else {
            mean_sq.sqrt()
        };
        let center_s = (start as f64 + window as f64 / 2.0) / sample_rate;
        weighted = weighted + rms.scale(center_s);
        total = total + rms;
        start += hop;
    }
    if total.value() == 0.0 {
        return Err(FeatureError::SilentSegment);
    }
    Ok(weighted / total)
}

/// Extract the seven scaled features of one hit.
///
/// Differentiable when the signal carries tangents. Hits shorter than the
/// analysis region are zero-padded and flagged.
pub fn extract_feature_vector<T: Scalar>(
    signal: &[T],
    cfg: &FrameConfig,
    sample_rate: f64,
) -> Result<Extraction<T>, FeatureError> {
    cfg.validate()?;
    if signal.is_empty() {
        return Err(FeatureError::EmptySignal);
    }

    let min_len = cfg.min_samples(sample_rate);
    let padded = signal.len() < min_len;
    let mut owned;
    let buf: &[T] = if padded {
        owned = signal.to_vec();
        owned.resize(min_len, T::zero());
        &owned
    } else {
        signal
    };

    let frame_len = cfg.frame_len(sample_rate);
    let hop = cfg.hop(sample_rate);
    let fft_size = cfg.fft_size(sample_rate);
    let n_frames = cfg.n_transient_frames + cfg.n_sustain_frames;
    let flat_top = window(WindowKind::FlatTop, frame_len);
    let frames = magnitude_frames(buf, frame_len, hop, fft_size, &flat_top, n_frames, true);
    let (transient, sustain) = frames.split_at(cfg.n_transient_frames);

    let sc_t = mean_spectral_centroid(transient, sample_rate, fft_size)?;
    let sc_s = mean_spectral_centroid(sustain, sample_rate, fft_size)?;
    let sf_t = mean_spectral_flatness(transient)?;
    let sf_s = mean_spectral_flatness(sustain)?;

    let lkfs_t = lkfs(&buf[cfg.transient_range(sample_rate)], sample_rate);
    let lkfs_s = lkfs(&buf[cfg.sustain_range(sample_rate)], sample_rate);

    let tc_raw = temporal_centroid_raw(buf, cfg, sample_rate)?;

    Ok(Extraction {
        features: [
            lkfs_t,
            lkfs_s,
            scale_spectral_centroid(sc_t),
            scale_spectral_centroid(sc_s),
            scale_spectral_flatness(sf_t),
            scale_spectral_flatness(sf_s),
            scale_temporal_centroid(tc_raw),
        ],
        padded,
    })
}
