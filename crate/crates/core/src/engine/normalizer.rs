//! Rolling min/max normalization of onset features.
//!
//! Live input drifts away from the training distribution, so the engine
//! keeps a ring of the most recent onset-feature values and normalizes
//! against their running range. Until enough onsets have been seen, or when
//! the observed range collapses (constant input), the stats stored in the
//! model file are used instead.

use crate::dataset::NormStats;
use crate::features::ONSET_FEATURE_COUNT;

const RANGE_EPS: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct RollingNormalizer {
    window: usize,
    ring: Vec<[f64; ONSET_FEATURE_COUNT]>,
    head: usize,
    count: usize,
    fallback: NormStats,
}

impl RollingNormalizer {
    pub fn new(window: usize, fallback: NormStats) -> Self {
        Self {
            window: window.max(2),
            ring: Vec::with_capacity(window.max(2)),
            head: 0,
            count: 0,
            fallback,
        }
    }

    /// Normalize one raw feature vector to `[0, 1]` against the state as it
    /// was before this onset, then absorb the raw value.
    pub fn normalize(
        &mut self,
        raw: [f64; ONSET_FEATURE_COUNT],
    ) -> [f64; ONSET_FEATURE_COUNT] {
        let out = self.normalize_only(raw);
        self.push(raw);
        out
    }

    fn normalize_only(&self, raw: [f64; ONSET_FEATURE_COUNT]) -> [f64; ONSET_FEATURE_COUNT] {
        if self.count < 2 {
            return self.fallback.normalize(raw);
        }
        std::array::from_fn(|i| {
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            for entry in &self.ring {
                min = min.min(entry[i]);
                max = max.max(entry[i]);
            }
            if max - min < RANGE_EPS {
                // Degenerate observed range; behave like the stored stats.
                ((raw[i] - self.fallback.min[i])
                    / (self.fallback.max[i] - self.fallback.min[i]))
                    .clamp(0.0, 1.0)
            } else {
                ((raw[i] - min) / (max - min + RANGE_EPS)).clamp(0.0, 1.0)
            }
        })
    }

    fn push(&mut self, raw: [f64; ONSET_FEATURE_COUNT]) {
        if self.ring.len() < self.window {
            self.ring.push(raw);
        } else {
            self.ring[self.head] = raw;
        }
        self.head = (self.head + 1) % self.window;
        self.count = self.count.saturating_add(1);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats() -> NormStats {
        NormStats {
            min: [0.0, 100.0, 0.0],
            max: [1.0, 5000.0, 0.5],
        }
    }

    #[test]
    fn first_onsets_use_stored_stats() {
        let mut norm = RollingNormalizer::new(8, stats());
        let out = norm.normalize([0.5, 2550.0, 0.25]);
        assert!((out[0] - 0.5).abs() < 1e-12);
        assert!((out[1] - 0.5).abs() < 1e-12);
        assert!((out[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn running_max_normalizes_to_one() {
        let mut norm = RollingNormalizer::new(8, stats());
        norm.normalize([0.1, 500.0, 0.1]);
        norm.normalize([0.4, 2000.0, 0.3]);
        // This value equals the running max before the update.
        let out = norm.normalize([0.4, 2000.0, 0.3]);
        for v in out {
            assert!((v - 1.0).abs() < 1e-4, "{v}");
        }
    }

    #[test]
    fn constant_stream_never_produces_nan() {
        let mut norm = RollingNormalizer::new(4, stats());
        for _ in 0..32 {
            let out = norm.normalize([0.5, 2550.0, 0.25]);
            for v in out {
                assert!(v.is_finite());
                assert!((0.0..=1.0).contains(&v));
            }
        }
        // Once the ring is constant, behavior matches the stored stats.
        let out = norm.normalize([0.5, 2550.0, 0.25]);
        assert!((out[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn old_values_age_out_of_the_window() {
        let mut norm = RollingNormalizer::new(2, stats());
        norm.normalize([10.0, 500.0, 0.1]);
        norm.normalize([0.0, 500.0, 0.1]);
        norm.normalize([0.1, 600.0, 0.2]);
        // The 10.0 outlier has been evicted; 0.2 is now above the window max.
        let out = norm.normalize([0.2, 700.0, 0.3]);
        assert!(out[0] > 0.9, "{}", out[0]);
    }
}
