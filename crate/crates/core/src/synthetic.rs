//! Synthetic drum performances for desk-scale experiments and tests.
//!
//! Real snare recordings cannot ship with the crate, so the full pipeline is
//! exercised on a generated stand-in: a sequence of synthesized hits whose
//! parameters wander around a preset along two latent axes, a strike
//! "velocity" driving level and snap, and a "timbre" axis driving noise
//! balance, brightness and decay. The latent structure makes the mapping
//! from onset features to modulations learnable, the way it is for a real
//! performance.
//!
//! One anchor strike plays the preset untouched, and the set is constructed
//! so that the anchor is the lower-median hit by transient loudness: the
//! reference-selection rule then lands on the unmodulated sound, which is
//! the anchor the timbre analogies are measured from.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::features::{extract_feature_vector, FrameConfig};
use crate::synth::{apply_modulation, render, ParamRangeTable, ParamSlot, Preset};
use crate::PARAM_COUNT;

pub struct SyntheticPerformance {
    pub signal: Vec<f64>,
    /// Ground-truth hit start positions (samples).
    pub onsets: Vec<usize>,
    /// Ground-truth modulation applied to each hit (all zeros for the
    /// anchor hit).
    pub theta_mods: Vec<[f64; PARAM_COUNT]>,
}

/// Generate `n_hits` modulated hits spaced 0.55 to 0.7 seconds apart.
pub fn synthetic_performance(
    preset: &Preset,
    n_hits: usize,
    sample_rate: f64,
    seed: u64,
) -> SyntheticPerformance {
    assert!(n_hits >= 3, "a performance needs at least a few hits");
    let ranges = ParamRangeTable::default();
    let frame_cfg = FrameConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hit_len_s = 0.5;

    let lkfs_t = |audio: &[f64]| {
        extract_feature_vector(audio, &frame_cfg, sample_rate)
            .expect("synthetic hit has energy")
            .features[0]
    };

    // The anchor: the preset itself.
    let anchor_audio = render(
        &preset.theta_pre.0,
        &ranges,
        hit_len_s,
        sample_rate,
        seed.wrapping_add(999),
    )
    .expect("anchor renders");
    let anchor_loudness = lkfs_t(&anchor_audio);

    // Draw modulated hits, keeping counts balanced around the anchor's
    // loudness so the anchor ends up at the lower median. A small dead zone
    // keeps the ranking stable against slicing effects downstream.
    let quieter_quota = (n_hits - 1) / 2;
    let louder_quota = n_hits - 1 - quieter_quota;
    let mut quieter: Vec<([f64; PARAM_COUNT], Vec<f64>)> = Vec::with_capacity(quieter_quota);
    let mut louder: Vec<([f64; PARAM_COUNT], Vec<f64>)> = Vec::with_capacity(louder_quota);
    let mut draw = 0u64;
    while quieter.len() < quieter_quota || louder.len() < louder_quota {
        let velocity = rng.gen::<f64>();
        // Brightness tracks strike velocity (hard hits ring the snares
        // more), with an independent bright-leaning component: most strikes
        // sit on the snappy side of the reference sound.
        let accent = rng.gen::<f64>().max(rng.gen::<f64>());
        let timbre = (0.5 + 0.2 * (velocity - 0.5) + 0.7 * (accent - 0.4)).clamp(0.0, 1.0);
        let theta_mod = latent_modulation(velocity, timbre, &mut rng);
        let theta = apply_modulation(&preset.theta_pre, &theta_mod);
        draw += 1;
        let audio = render(
            &theta.0,
            &ranges,
            hit_len_s,
            sample_rate,
            seed.wrapping_add(1000 + draw),
        )
        .expect("synthetic hit renders");
        let loudness = lkfs_t(&audio);
        if (loudness - anchor_loudness).abs() < 0.3 {
            continue; // too close to the anchor to rank reliably
        }
        if loudness < anchor_loudness && quieter.len() < quieter_quota {
            quieter.push((theta_mod, audio));
        } else if loudness > anchor_loudness && louder.len() < louder_quota {
            louder.push((theta_mod, audio));
        }
    }

    // Interleave quieter/louder draws so the performance is not sorted by
    // level, then splice the anchor into the middle.
    let mut hits: Vec<([f64; PARAM_COUNT], Vec<f64>)> = Vec::with_capacity(n_hits);
    let mut q = quieter.into_iter();
    let mut l = louder.into_iter();
    loop {
        match (q.next(), l.next()) {
            (Some(a), Some(b)) => {
                hits.push(a);
                hits.push(b);
            }
            (Some(a), None) => hits.push(a),
            (None, Some(b)) => hits.push(b),
            (None, None) => break,
        }
    }
    hits.insert(n_hits / 2, ([0.0; PARAM_COUNT], anchor_audio));

    let mut onsets = Vec::with_capacity(n_hits);
    let mut theta_mods = Vec::with_capacity(n_hits);
    let mut cursor = (0.1 * sample_rate) as usize;
    let mut positions = Vec::with_capacity(n_hits);
    for (theta_mod, _) in &hits {
        positions.push(cursor);
        onsets.push(cursor);
        theta_mods.push(*theta_mod);
        let spacing = 0.55 + rng.gen::<f64>() * 0.15;
        cursor += (spacing * sample_rate) as usize;
    }

    let total = cursor + (hit_len_s * sample_rate) as usize;
    let mut signal = vec![0.0; total];
    for (pos, (_, segment)) in positions.iter().zip(&hits) {
        for (i, &x) in segment.iter().enumerate() {
            signal[pos + i] += x;
        }
    }

    SyntheticPerformance {
        signal,
        onsets,
        theta_mods,
    }
}

/// Map the two latent axes onto parameter modulations, with a little
/// independent jitter per slot.
fn latent_modulation(velocity: f64, timbre: f64, rng: &mut ChaCha8Rng) -> [f64; PARAM_COUNT] {
    let v = velocity - 0.5;
    let w = timbre - 0.5;
    let mut modulation = [0.0; PARAM_COUNT];
    let mut set = |slot: ParamSlot, value: f64| {
        modulation[slot.index()] = value;
    };
    // v scales level and snap; w tilts the tonal body against the snare
    // noise and brightens it, like moving the strike point outward.
    set(ParamSlot::Osc1Gain, 0.25 * v - 0.08 * w);
    set(ParamSlot::Osc2Gain, 0.2 * v - 0.06 * w);
    set(ParamSlot::NoiseGain, 0.1 * v + 0.35 * w);
    set(ParamSlot::Osc1AmpDecay, 0.25 * w);
    set(ParamSlot::Osc2AmpDecay, 0.2 * w);
    set(ParamSlot::NoiseAmpDecay, -0.1 * v + 0.15 * w);
    set(ParamSlot::HpfCutoff, 0.55 * w + 0.05 * v);
    set(ParamSlot::HpfQ, 0.25 * w);
    set(ParamSlot::ShaperDrive, 0.2 * v);
    set(ParamSlot::FreqEnvDecay, 0.1 * v);
    set(ParamSlot::Osc1FmAmount, 0.08 * v);
    set(ParamSlot::Osc2FmAmount, 0.06 * v);
    // Jitter the driven slots; frequencies stay untouched.
    for m in modulation.iter_mut() {
        if *m != 0.0 {
            *m += (rng.gen::<f64>() - 0.5) * 0.04;
        }
    }
    modulation
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::factory_presets;

    #[test]
    fn generation_is_deterministic() {
        let preset = factory_presets().remove(0);
        let a = synthetic_performance(&preset, 12, 32000.0, 42);
        let b = synthetic_performance(&preset, 12, 32000.0, 42);
        assert_eq!(a.signal, b.signal);
        assert_eq!(a.onsets, b.onsets);
    }

    #[test]
    fn hits_are_separated_and_inside_the_signal() {
        let preset = factory_presets().remove(0);
        let perf = synthetic_performance(&preset, 10, 48000.0, 7);
        assert_eq!(perf.onsets.len(), 10);
        for pair in perf.onsets.windows(2) {
            let gap = pair[1] - pair[0];
            assert!(gap >= (0.55 * 48000.0) as usize);
        }
        assert!(perf.signal.len() > *perf.onsets.last().unwrap());
        assert!(perf.signal.iter().any(|&x| x.abs() > 0.01));
    }

    #[test]
    fn exactly_one_anchor_hit_at_the_loudness_median() {
        let preset = factory_presets().remove(0);
        let sr = 32000.0;
        let perf = synthetic_performance(&preset, 15, sr, 5);
        let anchors: Vec<usize> = perf
            .theta_mods
            .iter()
            .enumerate()
            .filter(|(_, m)| m.iter().all(|&x| x == 0.0))
            .map(|(i, _)| i)
            .collect();
        assert_eq!(anchors.len(), 1);

        let cfg = FrameConfig::default();
        let hit_len = (0.5 * sr) as usize;
        let loudness: Vec<f64> = perf
            .onsets
            .iter()
            .map(|&p| {
                let hit = &perf.signal[p..(p + hit_len).min(perf.signal.len())];
                extract_feature_vector(hit, &cfg, sr).unwrap().features[0]
            })
            .collect();
        let below = loudness
            .iter()
            .filter(|&&v| v < loudness[anchors[0]])
            .count();
        assert_eq!(below, (loudness.len() - 1) / 2);
    }

    #[test]
    fn detector_recovers_the_planted_onsets() {
        let preset = factory_presets().remove(0);
        let sr = 48000.0;
        let perf = synthetic_performance(&preset, 12, sr, 3);
        let found = crate::onsets::detect_onsets(
            &perf.signal,
            sr,
            &crate::onsets::OnsetConfig::default(),
        );
        assert_eq!(found.len(), perf.onsets.len(), "found {found:?}");
        for (f, t) in found.iter().zip(&perf.onsets) {
            assert!(
                (*f as i64 - *t as i64).unsigned_abs() <= 96,
                "onset {f} vs planted {t}"
            );
        }
    }
}
