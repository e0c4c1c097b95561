//! Real-time remapping engine.
//!
//! One audio thread owns all DSP state and runs the full chain per block:
//! streaming onset detection, a 256-sample post-onset capture, onset
//! features, rolling normalization, model inference, and polyphonic voice
//! synthesis. After initialization the audio path performs no heap
//! allocation, takes no locks, and never blocks; model swaps arrive through
//! a bounded lock-free queue and retired models are handed back to the
//! control thread for deallocation.
//!
//! The offline file mode drives the exact same `process_block`, so online
//! and offline output are identical for any block size.

mod normalizer;

pub use normalizer::RollingNormalizer;

use std::sync::Arc;

use crossbeam::queue::ArrayQueue;
use serde::{Deserialize, Serialize};

use crate::features::{OnsetFeatureExtractor, ONSET_FEATURE_COUNT};
use crate::models::{ForwardScratch, MappingModel};
use crate::onsets::{OnsetConfig, OnsetDetector};
use crate::synth::{apply_modulation, denormalize, ParamRangeTable, SnareVoice, SynthParams};
use crate::PARAM_COUNT;

/// Voices are reclaimed once every envelope has fallen below -90 dB, which
/// for the -60 dB decay-time convention happens at 1.5x the longest decay.
const VOICE_TAIL_FACTOR: f64 = 1.5;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EngineConfig {
    pub sample_rate: f64,
    pub block_size: usize,
    pub max_voices: usize,
    pub onset: OnsetConfig,
    /// Onsets remembered by the rolling normalizer.
    pub normalizer_window: usize,
    /// Base for per-trigger noise seeds; live mode counts up from here.
    pub noise_seed_base: u64,
    /// Capacity of the in-engine event log between drains.
    pub event_capacity: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            sample_rate: 48000.0,
            block_size: 128,
            max_voices: 8,
            onset: OnsetConfig::default(),
            normalizer_window: 64,
            noise_seed_base: 1,
            event_capacity: 1024,
        }
    }
}

/// One triggered hit, for the out-of-band event log.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TriggerEvent {
    /// Sample index where the onset detector fired.
    pub onset_sample: u64,
    /// Sample index where the voice began sounding (onset + capture window).
    pub trigger_sample: u64,
    pub features_raw: [f64; ONSET_FEATURE_COUNT],
    pub features_norm: [f64; ONSET_FEATURE_COUNT],
    pub theta_mod: [f64; PARAM_COUNT],
    pub theta: [f64; PARAM_COUNT],
    pub noise_seed: u64,
    /// True when feature extraction failed and the preset was triggered
    /// unmodulated.
    pub degraded: bool,
}

struct VoiceSlot {
    voice: SnareVoice<f64>,
    born: u64,
    remaining: u64,
}

/// Control-thread handle for swapping models without touching the audio
/// thread. Retired models must be collected here so their memory is freed
/// off the audio path.
pub struct EngineController {
    inbox: Arc<ArrayQueue<Box<MappingModel>>>,
    retired: Arc<ArrayQueue<Box<MappingModel>>>,
}

impl EngineController {
    /// Queue a model swap; applied at the next block boundary. Returns the
    /// model back if the queue is full.
    pub fn swap_model(&self, model: Box<MappingModel>) -> Result<(), Box<MappingModel>> {
        self.inbox.push(model)
    }

    /// Take back one replaced model for deallocation.
    pub fn collect_retired(&self) -> Option<Box<MappingModel>> {
        self.retired.pop()
    }
}

pub struct Engine {
    cfg: EngineConfig,
    model: Box<MappingModel>,
    theta_pre: SynthParams,
    ranges: ParamRangeTable,
    detector: OnsetDetector,
    normalizer: RollingNormalizer,
    extractor: OnsetFeatureExtractor,
    capture: Vec<f64>,
    capturing: bool,
    capture_onset_at: u64,
    voices: Vec<VoiceSlot>,
    scratch: ForwardScratch,
    events: Vec<TriggerEvent>,
    dropped_events: u64,
    clock: u64,
    trigger_count: u64,
    inbox: Arc<ArrayQueue<Box<MappingModel>>>,
    retired: Arc<ArrayQueue<Box<MappingModel>>>,
}

impl Engine {
    pub fn new(model: MappingModel, cfg: EngineConfig) -> Result<Self, crate::features::FeatureError> {
        let extractor = OnsetFeatureExtractor::new(model.meta.onset_window, cfg.sample_rate)?;
        let normalizer = RollingNormalizer::new(cfg.normalizer_window, model.meta.norm_stats);
        let theta_pre = model.meta.preset.theta_pre;
        let capture = Vec::with_capacity(model.meta.onset_window);
        let voices = Vec::with_capacity(cfg.max_voices);
        let events = Vec::with_capacity(cfg.event_capacity);
        Ok(Self {
            detector: OnsetDetector::new(&cfg.onset, cfg.sample_rate),
            normalizer,
            extractor,
            capture,
            capturing: false,
            capture_onset_at: 0,
            voices,
            scratch: ForwardScratch::new(),
            events,
            dropped_events: 0,
            clock: 0,
            trigger_count: 0,
            inbox: Arc::new(ArrayQueue::new(4)),
            retired: Arc::new(ArrayQueue::new(8)),
            model: Box::new(model),
            theta_pre,
            ranges: ParamRangeTable::default(),
            cfg,
        })
    }

    pub fn controller(&self) -> EngineController {
        EngineController {
            inbox: Arc::clone(&self.inbox),
            retired: Arc::clone(&self.retired),
        }
    }

    pub fn sample_rate(&self) -> f64 {
        self.cfg.sample_rate
    }

    /// Process one block of input into an equally sized output block.
    ///
    /// Real-time safe: no allocation, locking or blocking I/O. Event-log
    /// overflow drops events (counted) rather than allocating.
    pub fn process_block(&mut self, input: &[f64], output: &mut [f64]) {
        assert_eq!(input.len(), output.len());

        // Apply at most one pending model swap at the block boundary. The
        // old model is handed back for deallocation; if the retired queue is
        // full the swap waits for the controller to drain it.
        if !self.retired.is_full() {
            if let Some(new_model) = self.inbox.pop() {
                let old = std::mem::replace(&mut self.model, new_model);
                self.theta_pre = self.model.meta.preset.theta_pre;
                let _ = self.retired.push(old);
            }
        }

        for (i, (&x, out)) in input.iter().zip(output.iter_mut()).enumerate() {
            let sample_index = self.clock + i as u64;

            if self.detector.process(x) && !self.capturing {
                self.capturing = true;
                self.capture.clear();
                self.capture_onset_at = sample_index;
            }
            if self.capturing {
                self.capture.push(x);
                if self.capture.len() == self.extractor.window_len() {
                    self.capturing = false;
                    self.fire(sample_index);
                }
            }

            let mut mix = 0.0;
            let mut v = 0;
            while v < self.voices.len() {
                let slot = &mut self.voices[v];
                mix += slot.voice.next_sample();
                slot.remaining -= 1;
                if slot.remaining == 0 {
                    self.voices.swap_remove(v);
                } else {
                    v += 1;
                }
            }
            *out = mix;
        }
        self.clock += input.len() as u64;
    }

    fn fire(&mut self, trigger_sample: u64) {
        let (raw, norm, theta_mod, degraded) = match self.extractor.compute(&self.capture) {
            Ok(features) => {
                let raw = features.as_array();
                let norm = self.normalizer.normalize(raw);
                let mut theta_mod = [0.0; PARAM_COUNT];
                self.model
                    .forward_into(&norm, &mut self.scratch, &mut theta_mod);
                (raw, norm, theta_mod, false)
            }
            // Degenerate capture (e.g. silence): trigger the bare preset.
            Err(_) => ([0.0; ONSET_FEATURE_COUNT], [0.0; ONSET_FEATURE_COUNT], [0.0; PARAM_COUNT], true),
        };

        let theta = apply_modulation(&self.theta_pre, &theta_mod);
        let noise_seed = self.cfg.noise_seed_base.wrapping_add(self.trigger_count);
        self.trigger_count += 1;
        let params = denormalize(&theta.0, &self.ranges);
        let lifetime =
            (params.max_amp_decay() * VOICE_TAIL_FACTOR * self.cfg.sample_rate).ceil() as u64 + 64;
        let voice = match SnareVoice::new(&params, self.cfg.sample_rate, noise_seed) {
            Ok(v) => v,
            // Unreachable with clamped parameters; skip the trigger rather
            // than allocate an error path on the audio thread.
            Err(_) => return,
        };

        let slot = VoiceSlot {
            voice,
            born: trigger_sample,
            remaining: lifetime,
        };
        if self.voices.len() < self.cfg.max_voices {
            self.voices.push(slot);
        } else {
            // Steal the oldest voice.
            let oldest = self
                .voices
                .iter()
                .enumerate()
                .min_by_key(|(_, s)| s.born)
                .map(|(i, _)| i)
                .unwrap();
            self.voices[oldest] = slot;
        }

        let event = TriggerEvent {
            onset_sample: self.capture_onset_at,
            trigger_sample,
            features_raw: raw,
            features_norm: norm,
            theta_mod,
            theta: theta.0,
            noise_seed,
            degraded,
        };
        if self.events.len() < self.events.capacity() {
            self.events.push(event);
        } else {
            self.dropped_events += 1;
        }
    }

    /// Move accumulated events into `sink` (control-thread side).
    pub fn drain_events(&mut self, sink: &mut Vec<TriggerEvent>) {
        sink.append(&mut self.events);
    }

    pub fn dropped_events(&self) -> u64 {
        self.dropped_events
    }

    pub fn active_voices(&self) -> usize {
        self.voices.len()
    }
}

/// Offline file mode: run a whole signal through the engine in fixed-size
/// blocks. Per-sample state carries across block boundaries, so any block
/// size produces the same output.
pub fn remap_offline(
    model: MappingModel,
    cfg: &EngineConfig,
    input: &[f64],
) -> Result<(Vec<f64>, Vec<TriggerEvent>), crate::features::FeatureError> {
    let mut engine = Engine::new(model, cfg.clone())?;
    let block = cfg.block_size.max(1);
    let mut output = vec![0.0; input.len()];
    let mut events = Vec::new();
    let mut start = 0;
    while start < input.len() {
        let end = (start + block).min(input.len());
        let (chunk_in, chunk_out) = (&input[start..end], &mut output[start..end]);
        engine.process_block(chunk_in, chunk_out);
        engine.drain_events(&mut events);
        start = end;
    }
    // Let voice tails ring out past the end of the input.
    let tail_blocks = (cfg.sample_rate * 2.0 / block as f64).ceil() as usize;
    let silence = vec![0.0; block];
    let mut tail_out = vec![0.0; block];
    for _ in 0..tail_blocks {
        if engine.active_voices() == 0 {
            break;
        }
        engine.process_block(&silence, &mut tail_out);
        output.extend_from_slice(&tail_out);
    }
    engine.drain_events(&mut events);
    Ok((output, events))
}
