//! Preset storage: a name plus the fourteen normalized parameters.
//!
//! The JSON schema is strict: every slot must be present and unknown slots
//! are rejected, so a typo in a hand-edited preset fails loudly.

use serde::{Deserialize, Serialize};

use super::{SynthError, SynthParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PresetParamsFile {
    osc1_freq: f64,
    osc1_fm_amount: f64,
    osc1_gain: f64,
    osc1_amp_decay: f64,
    osc2_freq: f64,
    osc2_fm_amount: f64,
    osc2_gain: f64,
    osc2_amp_decay: f64,
    freq_env_decay: f64,
    noise_gain: f64,
    noise_amp_decay: f64,
    hpf_cutoff: f64,
    hpf_q: f64,
    shaper_drive: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PresetFile {
    name: String,
    params: PresetParamsFile,
}

/// A named starting point for timbre analogies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PresetFile", into = "PresetFile")]
pub struct Preset {
    pub name: String,
    pub theta_pre: SynthParams,
}

impl TryFrom<PresetFile> for Preset {
    type Error = SynthError;

    fn try_from(file: PresetFile) -> Result<Self, SynthError> {
        let p = &file.params;
        let theta = SynthParams::new([
            p.osc1_freq,
            p.osc1_fm_amount,
            p.osc1_gain,
            p.osc1_amp_decay,
            p.osc2_freq,
            p.osc2_fm_amount,
            p.osc2_gain,
            p.osc2_amp_decay,
            p.freq_env_decay,
            p.noise_gain,
            p.noise_amp_decay,
            p.hpf_cutoff,
            p.hpf_q,
            p.shaper_drive,
        ])?;
        Ok(Self::new(file.name, theta))
    }
}

impl From<Preset> for PresetFile {
    fn from(preset: Preset) -> Self {
        let v = &preset.theta_pre.0;
        PresetFile {
            name: preset.name.clone(),
            params: params_file(v),
        }
    }
}

fn params_file(v: &[f64; 14]) -> PresetParamsFile {
    PresetParamsFile {
        osc1_freq: v[0],
        osc1_fm_amount: v[1],
        osc1_gain: v[2],
        osc1_amp_decay: v[3],
        osc2_freq: v[4],
        osc2_fm_amount: v[5],
        osc2_gain: v[6],
        osc2_amp_decay: v[7],
        freq_env_decay: v[8],
        noise_gain: v[9],
        noise_amp_decay: v[10],
        hpf_cutoff: v[11],
        hpf_q: v[12],
        shaper_drive: v[13],
    }
}

impl Preset {
    pub fn new(name: impl Into<String>, theta_pre: SynthParams) -> Self {
        Self {
            name: name.into(),
            theta_pre,
        }
    }

    pub fn from_json(json: &str) -> Result<Self, SynthError> {
        serde_json::from_str(json).map_err(|e| SynthError::PresetFormat(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("preset serialization")
    }

    pub fn load(path: &std::path::Path) -> Result<Self, SynthError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SynthError::PresetFormat(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

const FACTORY: [&str; 5] = [
    include_str!("../../presets/classic.json"),
    include_str!("../../presets/tight.json"),
    include_str!("../../presets/boomy.json"),
    include_str!("../../presets/bright.json"),
    include_str!("../../presets/crushed.json"),
];

/// The five built-in presets shipped with the crate.
pub fn factory_presets() -> Vec<Preset> {
    FACTORY
        .iter()
        .map(|json| Preset::from_json(json).expect("factory preset is valid"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::ParamSlot;

    #[test]
    fn factory_presets_parse_and_are_distinct() {
        let presets = factory_presets();
        assert_eq!(presets.len(), 5);
        for i in 0..presets.len() {
            for j in (i + 1)..presets.len() {
                assert_ne!(presets[i].theta_pre, presets[j].theta_pre);
                assert_ne!(presets[i].name, presets[j].name);
            }
        }
    }

    #[test]
    fn round_trips_through_json() {
        let preset = factory_presets().remove(0);
        let round = Preset::from_json(&preset.to_json()).unwrap();
        assert_eq!(preset, round);
    }

    #[test]
    fn unknown_slot_is_rejected() {
        let mut json: serde_json::Value =
            serde_json::from_str(&factory_presets()[0].to_json()).unwrap();
        json["params"]["mystery_knob"] = 0.5.into();
        assert!(Preset::from_json(&json.to_string()).is_err());
    }

    #[test]
    fn missing_slot_is_rejected() {
        let mut json: serde_json::Value =
            serde_json::from_str(&factory_presets()[0].to_json()).unwrap();
        json["params"].as_object_mut().unwrap().remove("hpf_q");
        assert!(Preset::from_json(&json.to_string()).is_err());
    }

    #[test]
    fn out_of_range_param_is_rejected() {
        let mut json: serde_json::Value =
            serde_json::from_str(&factory_presets()[0].to_json()).unwrap();
        json["params"]["osc1_gain"] = 1.5.into();
        assert!(Preset::from_json(&json.to_string()).is_err());
    }

    #[test]
    fn slot_names_match_param_order() {
        // The file layout above must stay in sync with ParamSlot::ALL.
        let preset = factory_presets().remove(0);
        let json: serde_json::Value = serde_json::from_str(&preset.to_json()).unwrap();
        for slot in ParamSlot::ALL {
            let v = json["params"][slot.name()].as_f64().unwrap();
            assert_eq!(v, preset.theta_pre.get(slot));
        }
    }
}
