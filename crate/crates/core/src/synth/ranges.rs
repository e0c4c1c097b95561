//! Normalized-to-physical parameter mapping.

use serde::{Deserialize, Serialize};

use super::ParamSlot;
use crate::autodiff::Scalar;
use crate::PARAM_COUNT;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RangeCurve {
    Linear,
    Exponential,
}

/// Physical range of one slot. Exponential curves require `min > 0`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ParamRange {
    pub min: f64,
    pub max: f64,
    pub curve: RangeCurve,
}

impl ParamRange {
    const fn lin(min: f64, max: f64) -> Self {
        Self {
            min,
            max,
            curve: RangeCurve::Linear,
        }
    }

    const fn exp(min: f64, max: f64) -> Self {
        Self {
            min,
            max,
            curve: RangeCurve::Exponential,
        }
    }
}

/// Per-slot physical ranges, in slot order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParamRangeTable(pub [ParamRange; PARAM_COUNT]);

impl ParamRangeTable {
    pub fn get(&self, slot: ParamSlot) -> &ParamRange {
        &self.0[slot.index()]
    }

    pub fn validate(&self) -> Result<(), String> {
        for (slot, r) in ParamSlot::ALL.iter().zip(self.0.iter()) {
            if !(r.min < r.max) {
                return Err(format!("range for {}: min >= max", slot.name()));
            }
            if r.curve == RangeCurve::Exponential && r.min <= 0.0 {
                return Err(format!(
                    "exponential range for {} requires min > 0",
                    slot.name()
                ));
            }
        }
        Ok(())
    }
}

impl Default for ParamRangeTable {
    fn default() -> Self {
        // Oscillator ranges bracket the TR-808 snare's two resonant modes
        // (roughly 180 Hz and 330 Hz).
        Self([
            ParamRange::exp(40.0, 400.0),     // osc1_freq (Hz)
            ParamRange::lin(0.0, 8.0),        // osc1_fm_amount
            ParamRange::lin(0.0, 1.0),        // osc1_gain
            ParamRange::exp(0.01, 2.0),       // osc1_amp_decay (s)
            ParamRange::exp(80.0, 800.0),     // osc2_freq (Hz)
            ParamRange::lin(0.0, 8.0),        // osc2_fm_amount
            ParamRange::lin(0.0, 1.0),        // osc2_gain
            ParamRange::exp(0.01, 2.0),       // osc2_amp_decay (s)
            ParamRange::exp(0.005, 0.3),      // freq_env_decay (s)
            ParamRange::lin(0.0, 1.0),        // noise_gain
            ParamRange::exp(0.01, 2.0),       // noise_amp_decay (s)
            ParamRange::exp(20.0, 16000.0),   // hpf_cutoff (Hz)
            ParamRange::exp(0.5, 10.0),       // hpf_q
            ParamRange::exp(0.1, 10.0),       // shaper_drive
        ])
    }
}

/// Map one normalized value to physical units.
///
/// Linear slots map affinely; exponential slots map as
/// `min * (max/min)^theta`, so the normalized midpoint lands on the
/// geometric mean of the range. Both mappings are monotone and invertible.
pub fn denormalize_slot<T: Scalar>(theta: T, range: &ParamRange) -> T {
    match range.curve {
        RangeCurve::Linear => theta.scale(range.max - range.min).offset(range.min),
        RangeCurve::Exponential => theta
            .scale((range.max / range.min).ln())
            .exp()
            .scale(range.min),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_table_is_valid() {
        ParamRangeTable::default().validate().unwrap();
    }

    #[test]
    fn endpoints_map_to_min_and_max() {
        for range in ParamRangeTable::default().0.iter() {
            assert!((denormalize_slot(0.0f64, range) - range.min).abs() < 1e-9 * range.max);
            assert!((denormalize_slot(1.0f64, range) - range.max).abs() < 1e-9 * range.max);
        }
    }

    #[test]
    fn exponential_midpoint_is_geometric_mean() {
        let range = ParamRange::exp(40.0, 400.0);
        let mid = denormalize_slot(0.5f64, &range);
        assert!((mid - (40.0f64 * 400.0).sqrt()).abs() < 1e-9);
        assert!((mid - 126.49).abs() < 0.01);
    }

    #[test]
    fn denormalization_is_monotone() {
        for range in ParamRangeTable::default().0.iter() {
            let mut prev = f64::NEG_INFINITY;
            for i in 0..=20 {
                let v = denormalize_slot(i as f64 / 20.0, range);
                assert!(v > prev);
                prev = v;
            }
        }
    }
}
