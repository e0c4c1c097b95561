//! Differentiable TR-808-style snare drum synthesizer.
//!
//! Two FM-enveloped sine oscillators in parallel with a high-pass-filtered
//! noise source, each with its own gain and exponentially decaying amplitude
//! envelope, summed into a hyperbolic-tangent waveshaper. All fourteen
//! controls live in a normalized `[0, 1]` space and map to physical units
//! through a configurable range table.

mod biquad;
mod preset;
mod ranges;
mod voice;

pub use biquad::{highpass_coefficients, highpass_magnitude_response, Biquad};
pub use preset::{factory_presets, Preset};
pub use ranges::{denormalize_slot, ParamRange, ParamRangeTable, RangeCurve};
pub use voice::{denormalize, exp_envelope, render, PhysicalParams, SnareVoice};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::PARAM_COUNT;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("render duration must be positive, got {0}")]
    InvalidDuration(f64),
    #[error("decay time must be positive, got {0}")]
    InvalidDecay(f64),
    #[error("parameter {name} = {value} outside [0, 1]")]
    ParamOutOfRange { name: &'static str, value: f64 },
    #[error("filter cutoff {cutoff} Hz invalid for sample rate {sample_rate}")]
    InvalidCutoff { cutoff: f64, sample_rate: f64 },
    #[error("preset file error: {0}")]
    PresetFormat(String),
}

/// The fourteen synthesizer controls, in parameter-vector order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamSlot {
    Osc1Freq,
    Osc1FmAmount,
    Osc1Gain,
    Osc1AmpDecay,
    Osc2Freq,
    Osc2FmAmount,
    Osc2Gain,
    Osc2AmpDecay,
    FreqEnvDecay,
    NoiseGain,
    NoiseAmpDecay,
    HpfCutoff,
    HpfQ,
    ShaperDrive,
}

impl ParamSlot {
    pub const ALL: [ParamSlot; PARAM_COUNT] = [
        ParamSlot::Osc1Freq,
        ParamSlot::Osc1FmAmount,
        ParamSlot::Osc1Gain,
        ParamSlot::Osc1AmpDecay,
        ParamSlot::Osc2Freq,
        ParamSlot::Osc2FmAmount,
        ParamSlot::Osc2Gain,
        ParamSlot::Osc2AmpDecay,
        ParamSlot::FreqEnvDecay,
        ParamSlot::NoiseGain,
        ParamSlot::NoiseAmpDecay,
        ParamSlot::HpfCutoff,
        ParamSlot::HpfQ,
        ParamSlot::ShaperDrive,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&s| s == self).unwrap()
    }

    pub fn name(self) -> &'static str {
        match self {
            ParamSlot::Osc1Freq => "osc1_freq",
            ParamSlot::Osc1FmAmount => "osc1_fm_amount",
            ParamSlot::Osc1Gain => "osc1_gain",
            ParamSlot::Osc1AmpDecay => "osc1_amp_decay",
            ParamSlot::Osc2Freq => "osc2_freq",
            ParamSlot::Osc2FmAmount => "osc2_fm_amount",
            ParamSlot::Osc2Gain => "osc2_gain",
            ParamSlot::Osc2AmpDecay => "osc2_amp_decay",
            ParamSlot::FreqEnvDecay => "freq_env_decay",
            ParamSlot::NoiseGain => "noise_gain",
            ParamSlot::NoiseAmpDecay => "noise_amp_decay",
            ParamSlot::HpfCutoff => "hpf_cutoff",
            ParamSlot::HpfQ => "hpf_q",
            ParamSlot::ShaperDrive => "shaper_drive",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|s| s.name() == name)
    }
}

/// Normalized parameter vector, every component in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SynthParams(pub [f64; PARAM_COUNT]);

impl SynthParams {
    pub fn new(values: [f64; PARAM_COUNT]) -> Result<Self, SynthError> {
        for (slot, &v) in ParamSlot::ALL.iter().zip(values.iter()) {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(SynthError::ParamOutOfRange {
                    name: slot.name(),
                    value: v,
                });
            }
        }
        Ok(Self(values))
    }

    pub fn get(&self, slot: ParamSlot) -> f64 {
        self.0[slot.index()]
    }

    pub fn set(&mut self, slot: ParamSlot, value: f64) {
        self.0[slot.index()] = value.clamp(0.0, 1.0);
    }
}

/// `clamp(theta_pre + theta_mod, 0, 1)` componentwise, in normalized space.
pub fn apply_modulation(theta_pre: &SynthParams, theta_mod: &[f64; PARAM_COUNT]) -> SynthParams {
    let mut out = [0.0; PARAM_COUNT];
    for i in 0..PARAM_COUNT {
        out[i] = (theta_pre.0[i] + theta_mod[i]).clamp(0.0, 1.0);
    }
    SynthParams(out)
}
