//! Short-window control features captured right after a detected onset.
//!
//! These mirror the cheap real-time path: plain RMS over the raw samples
//! plus spectral centroid and flatness from a Hann-windowed FFT, with no
//! log compression. The extractor owns its FFT plan and buffers so that
//! computing features on the audio thread allocates nothing.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::FeatureError;

pub const ONSET_FEATURE_COUNT: usize = 3;

const FLATNESS_EPS: f64 = 1e-10;

/// Raw (unnormalized) onset features.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnsetFeatures {
    pub rms: f64,
    pub spectral_centroid: f64,
    pub spectral_flatness: f64,
}

impl OnsetFeatures {
    pub fn as_array(&self) -> [f64; ONSET_FEATURE_COUNT] {
        [self.rms, self.spectral_centroid, self.spectral_flatness]
    }

    pub fn from_array(a: [f64; ONSET_FEATURE_COUNT]) -> Self {
        Self {
            rms: a[0],
            spectral_centroid: a[1],
            spectral_flatness: a[2],
        }
    }
}

/// Reusable extractor for a fixed onset window length (256 by default,
/// 2048 for the long-context variant).
pub struct OnsetFeatureExtractor {
    window_len: usize,
    hann: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
    sample_rate: f64,
}

impl OnsetFeatureExtractor {
    pub fn new(window_len: usize, sample_rate: f64) -> Result<Self, FeatureError> {
        if !window_len.is_power_of_two() || window_len < 8 {
            return Err(FeatureError::InvalidConfig(format!(
                "onset window {window_len} must be a power of two of at least 8"
            )));
        }
        let fft = FftPlanner::new().plan_fft_forward(window_len);
        let scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        Ok(Self {
            window_len,
            hann: super::window(super::WindowKind::Hann, window_len),
            fft,
            buf: vec![Complex::new(0.0, 0.0); window_len],
            scratch,
            sample_rate,
        })
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    /// Features of one post-onset buffer. The buffer must be exactly the
    /// configured window length. A buffer with no spectral energy cannot
    /// yield a centroid and is reported as an error so the caller can drop
    /// or degrade the event.
    pub fn compute(&mut self, samples: &[f64]) -> Result<OnsetFeatures, FeatureError> {
        if samples.len() != self.window_len {
            return Err(FeatureError::WrongBufferLength {
                got: samples.len(),
                want: self.window_len,
            });
        }

        let mean_sq =
            samples.iter().map(|x| x * x).sum::<f64>() / self.window_len as f64;
        let rms = mean_sq.sqrt();

        for ((slot, &x), &w) in self.buf.iter_mut().zip(samples).zip(&self.hann) {
            slot.re = x * w;
            slot.im = 0.0;
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);

        let bins = self.window_len / 2 + 1;
        let bin_hz = self.sample_rate / self.window_len as f64;
        let mut weighted = 0.0;
        let mut total = 0.0;
        let mut log_sum = 0.0;
        let mut lin_sum = 0.0;
        for (k, c) in self.buf[..bins].iter().enumerate() {
            let mag = (c.re * c.re + c.im * c.im).sqrt();
            weighted += mag * k as f64 * bin_hz;
            total += mag;
            let floored = mag.max(FLATNESS_EPS);
            log_sum += floored.ln();
            lin_sum += floored;
        }
        if total <= 0.0 {
            return Err(FeatureError::SilentSegment);
        }
        let inv_n = 1.0 / bins as f64;
        Ok(OnsetFeatures {
            rms,
            spectral_centroid: weighted / total,
            spectral_flatness: (log_sum * inv_n).exp() / (lin_sum * inv_n),
        })
    }
}

/// One-shot convenience wrapper around [`OnsetFeatureExtractor`].
pub fn onset_features(
    samples: &[f64],
    sample_rate: f64,
) -> Result<OnsetFeatures, FeatureError> {
    OnsetFeatureExtractor::new(samples.len().next_power_of_two().max(8), sample_rate)
        .and_then(|mut e| e.compute(samples))
}
