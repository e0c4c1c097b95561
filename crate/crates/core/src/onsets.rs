//! Amplitude-based onset detection.
//!
//! Two one-pole envelope followers track the rectified signal in decibels:
//! a fast follower that jumps on transients and a slow follower that tracks
//! the local level. An onset fires when their difference rises through the
//! on-threshold; the detector re-arms once the difference falls back below
//! the off-threshold. Onsets closer together than the minimum inter-onset
//! gap are suppressed (the first one wins).
//!
//! The detector is streaming and allocation-free, so the same instance
//! serves both offline segmentation and the real-time engine.

use serde::{Deserialize, Serialize};

/// Rectified levels are floored here before the dB conversion.
const DB_FLOOR: f64 = -120.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnsetConfig {
    pub fast_attack_ms: f64,
    pub fast_release_ms: f64,
    pub slow_attack_ms: f64,
    pub slow_release_ms: f64,
    pub on_threshold_db: f64,
    pub off_threshold_db: f64,
    pub min_inter_onset_ms: f64,
}

impl Default for OnsetConfig {
    fn default() -> Self {
        Self {
            fast_attack_ms: 1.0,
            fast_release_ms: 50.0,
            slow_attack_ms: 50.0,
            slow_release_ms: 50.0,
            on_threshold_db: 9.0,
            off_threshold_db: 3.0,
            min_inter_onset_ms: 50.0,
        }
    }
}

impl OnsetConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.on_threshold_db <= self.off_threshold_db {
            return Err(format!(
                "on threshold {} must exceed off threshold {}",
                self.on_threshold_db, self.off_threshold_db
            ));
        }
        for (name, v) in [
            ("fast_attack_ms", self.fast_attack_ms),
            ("fast_release_ms", self.fast_release_ms),
            ("slow_attack_ms", self.slow_attack_ms),
            ("slow_release_ms", self.slow_release_ms),
            ("min_inter_onset_ms", self.min_inter_onset_ms),
        ] {
            if !(v > 0.0) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
struct EnvelopeFollower {
    attack_coeff: f64,
    release_coeff: f64,
    env_db: f64,
}

impl EnvelopeFollower {
    fn new(attack_ms: f64, release_ms: f64, sample_rate: f64) -> Self {
        let coeff = |ms: f64| 1.0 - (-1000.0 / (ms * sample_rate)).exp();
        Self {
            attack_coeff: coeff(attack_ms),
            release_coeff: coeff(release_ms),
            env_db: DB_FLOOR,
        }
    }

    #[inline(always)]
    fn process(&mut self, level_db: f64) -> f64 {
        let coeff = if level_db > self.env_db {
            self.attack_coeff
        } else {
            self.release_coeff
        };
        self.env_db += coeff * (level_db - self.env_db);
        self.env_db
    }
}

/// Streaming onset detector; feed one sample at a time.
#[derive(Clone, Debug)]
pub struct OnsetDetector {
    fast: EnvelopeFollower,
    slow: EnvelopeFollower,
    on_threshold_db: f64,
    off_threshold_db: f64,
    min_gap_samples: u64,
    armed: bool,
    samples_since_onset: u64,
}

impl OnsetDetector {
    pub fn new(cfg: &OnsetConfig, sample_rate: f64) -> Self {
        Self {
            fast: EnvelopeFollower::new(cfg.fast_attack_ms, cfg.fast_release_ms, sample_rate),
            slow: EnvelopeFollower::new(cfg.slow_attack_ms, cfg.slow_release_ms, sample_rate),
            on_threshold_db: cfg.on_threshold_db,
            off_threshold_db: cfg.off_threshold_db,
            min_gap_samples: (cfg.min_inter_onset_ms * sample_rate / 1000.0).round() as u64,
            armed: true,
            samples_since_onset: u64::MAX / 2,
        }
    }

    /// Returns true when an onset fires at this sample.
    #[inline]
    pub fn process(&mut self, sample: f64) -> bool {
        let level_db = (20.0 * sample.abs().max(1e-12).log10()).max(DB_FLOOR);
        let diff = self.fast.process(level_db) - self.slow.process(level_db);
        self.samples_since_onset = self.samples_since_onset.saturating_add(1);

        if self.armed && diff >= self.on_threshold_db {
            self.armed = false;
            if self.samples_since_onset >= self.min_gap_samples {
                self.samples_since_onset = 0;
                return true;
            }
        } else if !self.armed && diff < self.off_threshold_db {
            self.armed = true;
        }
        false
    }
}

/// Offline convenience: onset sample indices of a whole signal.
pub fn detect_onsets(signal: &[f64], sample_rate: f64, cfg: &OnsetConfig) -> Vec<usize> {
    let mut detector = OnsetDetector::new(cfg, sample_rate);
    signal
        .iter()
        .enumerate()
        .filter_map(|(i, &x)| detector.process(x).then_some(i))
        .collect()
}
