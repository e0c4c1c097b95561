//! Parameter-modulation predictors: onset features in, modulations out.
//!
//! Three sizes are supported: a plain linear map (56 parameters), an MLP
//! with one 32-unit hidden layer (590 parameters), and an MLP with three
//! 64-unit hidden layers (9500 parameters). MLP outputs pass through a tanh
//! head so modulations stay bounded in normalized parameter space; the
//! linear model is left unbounded and relies on the clamp when modulations
//! are applied. Oscillator-frequency slots are damped by a fixed output
//! mask so uninformative pitch gradients cannot dominate training.
//!
//! Final layers initialize to zero: a fresh model always emits a zero
//! modulation, so the synthesizer starts at the untouched preset.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::NormStats;
use crate::features::{FrameConfig, ONSET_FEATURE_COUNT};
use crate::synth::Preset;
use crate::PARAM_COUNT;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// Damping factor applied to the two oscillator-frequency slots.
pub const FREQ_DAMPING: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model file: {0}")]
    Format(String),
    #[error("model validation: {0}")]
    Validation(String),
    #[error("model i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Linear,
    Mlp32,
    Mlp64x3,
}

impl ModelKind {
    /// `(fan_in, fan_out)` of every affine layer, input to output.
    pub fn layer_shapes(self) -> Vec<(usize, usize)> {
        let i = ONSET_FEATURE_COUNT;
        let o = PARAM_COUNT;
        match self {
            ModelKind::Linear => vec![(i, o)],
            ModelKind::Mlp32 => vec![(i, 32), (32, o)],
            ModelKind::Mlp64x3 => vec![(i, 64), (64, 64), (64, 64), (64, o)],
        }
    }

    pub fn param_count(self) -> usize {
        self.layer_shapes()
            .iter()
            .map(|(fi, fo)| fi * fo + fo)
            .sum()
    }

    fn has_tanh_head(self) -> bool {
        !matches!(self, ModelKind::Linear)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::Mlp32 => "mlp32",
            ModelKind::Mlp64x3 => "mlp64x3",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "linear" => Ok(ModelKind::Linear),
            "mlp32" => Ok(ModelKind::Mlp32),
            "mlp64x3" => Ok(ModelKind::Mlp64x3),
            other => Err(format!(
                "unknown model kind {other:?} (expected linear, mlp32 or mlp64x3)"
            )),
        }
    }
}

/// Everything a saved model must carry besides its weights, so the engine
/// can reproduce training-time preprocessing exactly.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelMeta {
    pub norm_stats: NormStats,
    pub frame_cfg: FrameConfig,
    pub onset_window: usize,
    pub preset: Preset,
}

/// Reusable activation buffers for allocation-free forward passes.
pub struct ForwardScratch {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl ForwardScratch {
    pub fn new() -> Self {
        // Largest hidden width across all kinds.
        Self {
            a: vec![0.0; 64],
            b: vec![0.0; 64],
        }
    }
}

impl Default for ForwardScratch {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients from one backward pass.
pub struct Gradients {
    /// Flat layout matching [`MappingModel::params`].
    pub params: Vec<f64>,
    pub input: [f64; ONSET_FEATURE_COUNT],
}

#[derive(Clone, Debug)]
pub struct MappingModel {
    pub kind: ModelKind,
    /// Flat parameters, layer-major: weights (row-major, one row per output
    /// unit) then biases, for each layer in order.
    params: Vec<f64>,
    pub damping: [f64; PARAM_COUNT],
    pub meta: ModelMeta,
}

fn default_damping() -> [f64; PARAM_COUNT] {
    let mut mask = [1.0; PARAM_COUNT];
    mask[crate::synth::ParamSlot::Osc1Freq.index()] = FREQ_DAMPING;
    mask[crate::synth::ParamSlot::Osc2Freq.index()] = FREQ_DAMPING;
    mask
}

impl MappingModel {
    /// Fresh model: hidden layers uniform in `(-sqrt(1/fan_in), sqrt(1/fan_in))`,
    /// final layer all zeros.
    pub fn init(kind: ModelKind, seed: u64, meta: ModelMeta) -> Self {
        let shapes = kind.layer_shapes();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(kind.param_count());
        for (layer, &(fan_in, fan_out)) in shapes.iter().enumerate() {
            let count = fan_in * fan_out + fan_out;
            if layer + 1 == shapes.len() {
                params.extend(std::iter::repeat(0.0).take(count));
            } else {
                let bound = (1.0 / fan_in as f64).sqrt();
                params.extend((0..count).map(|_| rng.gen_range(-bound..bound)));
            }
        }
        Self {
            kind,
            params,
            damping: default_damping(),
            meta,
        }
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.params.len());
        self.params.copy_from_slice(params);
    }

    /// Predict a modulation vector. Inputs are clamped to `[0, 1]`.
    pub fn forward(&self, input: &[f64; ONSET_FEATURE_COUNT]) -> [f64; PARAM_COUNT] {
        let mut scratch = ForwardScratch::new();
        let mut out = [0.0; PARAM_COUNT];
        self.forward_into(input, &mut scratch, &mut out);
        out
    }

    /// Allocation-free forward pass for the audio thread.
    pub fn forward_into(
        &self,
        input: &[f64; ONSET_FEATURE_COUNT],
        scratch: &mut ForwardScratch,
        out: &mut [f64; PARAM_COUNT],
    ) {
        let shapes = self.kind.layer_shapes();
        for (i, x) in input.iter().enumerate() {
            scratch.a[i] = x.clamp(0.0, 1.0);
        }
        let mut offset = 0;
        let n_layers = shapes.len();
        for (layer, &(fan_in, fan_out)) in shapes.iter().enumerate() {
            let weights = &self.params[offset..offset + fan_in * fan_out];
            let bias = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            offset += fan_in * fan_out + fan_out;
            let last = layer + 1 == n_layers;
            for o in 0..fan_out {
                let row = &weights[o * fan_in..(o + 1) * fan_in];
                let mut z = bias[o];
                for i in 0..fan_in {
                    z += row[i] * scratch.a[i];
                }
                if last {
                    let activated = if self.kind.has_tanh_head() { z.tanh() } else { z };
                    out[o] = activated * self.damping[o];
                } else {
                    scratch.b[o] = z.max(0.0);
                }
            }
            if !last {
                std::mem::swap(&mut scratch.a, &mut scratch.b);
            }
        }
    }

    /// Exact analytic gradients of the affine/ReLU/tanh/mask composition,
    /// recomputing activations rather than caching them.
    pub fn backward(
        &self,
        input: &[f64; ONSET_FEATURE_COUNT],
        upstream: &[f64; PARAM_COUNT],
    ) -> Gradients {
        let shapes = self.kind.layer_shapes();
        let clamped: [f64; ONSET_FEATURE_COUNT] =
            std::array::from_fn(|i| input[i].clamp(0.0, 1.0));

        // Forward, keeping each layer's input and pre-activation.
        let mut layer_inputs: Vec<Vec<f64>> = Vec::with_capacity(shapes.len());
        let mut preacts: Vec<Vec<f64>> = Vec::with_capacity(shapes.len());
        let mut cur: Vec<f64> = clamped.to_vec();
        let mut offset = 0;
        for (layer, &(fan_in, fan_out)) in shapes.iter().enumerate() {
            let weights = &self.params[offset..offset + fan_in * fan_out];
            let bias = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            offset += fan_in * fan_out + fan_out;
            let z: Vec<f64> = (0..fan_out)
                .map(|o| {
                    let row = &weights[o * fan_in..(o + 1) * fan_in];
                    bias[o] + row.iter().zip(&cur).map(|(w, x)| w * x).sum::<f64>()
                })
                .collect();
            layer_inputs.push(std::mem::take(&mut cur));
            if layer + 1 == shapes.len() {
                preacts.push(z);
            } else {
                cur = z.iter().map(|&v| v.max(0.0)).collect();
                preacts.push(z);
            }
        }

        // Backward.
        let mut grads = vec![0.0; self.params.len()];
        let final_z = preacts.last().unwrap();
        let mut g: Vec<f64> = (0..PARAM_COUNT)
            .map(|o| {
                let head = if self.kind.has_tanh_head() {
                    let t = final_z[o].tanh();
                    1.0 - t * t
                } else {
                    1.0
                };
                upstream[o] * self.damping[o] * head
            })
            .collect();

        let mut input_grad = [0.0; ONSET_FEATURE_COUNT];
        let mut offsets: Vec<usize> = Vec::with_capacity(shapes.len());
        let mut acc = 0;
        for &(fan_in, fan_out) in &shapes {
            offsets.push(acc);
            acc += fan_in * fan_out + fan_out;
        }

        for layer in (0..shapes.len()).rev() {
            let (fan_in, fan_out) = shapes[layer];
            let offset = offsets[layer];
            let h = &layer_inputs[layer];
            let weights = &self.params[offset..offset + fan_in * fan_out];
            {
                let (w_grad, b_grad) =
                    grads[offset..offset + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
                for o in 0..fan_out {
                    b_grad[o] = g[o];
                    for i in 0..fan_in {
                        w_grad[o * fan_in + i] = g[o] * h[i];
                    }
                }
            }
            // Propagate to the layer input.
            let mut dh = vec![0.0; fan_in];
            for o in 0..fan_out {
                let row = &weights[o * fan_in..(o + 1) * fan_in];
                for i in 0..fan_in {
                    dh[i] += row[i] * g[o];
                }
            }
            if layer == 0 {
                for i in 0..ONSET_FEATURE_COUNT {
                    // Clamp subgradient: zero where the input was clamped.
                    input_grad[i] = if (0.0..=1.0).contains(&input[i]) {
                        dh[i]
                    } else {
                        0.0
                    };
                }
            } else {
                let z = &preacts[layer - 1];
                g = dh
                    .iter()
                    .zip(z)
                    .map(|(&d, &zv)| if zv > 0.0 { d } else { 0.0 })
                    .collect();
            }
        }

        Gradients {
            params: grads,
            input: input_grad,
        }
    }

    pub fn to_json(&self) -> String {
        let shapes = self.kind.layer_shapes();
        let mut layers = Vec::with_capacity(shapes.len());
        let mut offset = 0;
        for &(fan_in, fan_out) in &shapes {
            layers.push(LayerFile {
                fan_in,
                fan_out,
                weights: self.params[offset..offset + fan_in * fan_out].to_vec(),
                bias: self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out]
                    .to_vec(),
            });
            offset += fan_in * fan_out + fan_out;
        }
        let file = ModelFile {
            schema_version: MODEL_SCHEMA_VERSION,
            kind: self.kind,
            layers,
            damping: self.damping.to_vec(),
            norm_stats: self.meta.norm_stats,
            frame_cfg: self.meta.frame_cfg,
            onset_window: self.meta.onset_window,
            preset: self.meta.preset.clone(),
        };
        serde_json::to_string_pretty(&file).expect("model serialization")
    }

    pub fn from_json(json: &str) -> Result<Self, ModelError> {
        let file: ModelFile =
            serde_json::from_str(json).map_err(|e| ModelError::Format(e.to_string()))?;
        if file.schema_version != MODEL_SCHEMA_VERSION {
            return Err(ModelError::Validation(format!(
                "schema version {} (expected {MODEL_SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        let shapes = file.kind.layer_shapes();
        if file.layers.len() != shapes.len() {
            return Err(ModelError::Validation(format!(
                "{} layers for kind {} (expected {})",
                file.layers.len(),
                file.kind.name(),
                shapes.len()
            )));
        }
        let mut params = Vec::with_capacity(file.kind.param_count());
        for (layer, &(fan_in, fan_out)) in file.layers.iter().zip(&shapes) {
            if layer.fan_in != fan_in
                || layer.fan_out != fan_out
                || layer.weights.len() != fan_in * fan_out
                || layer.bias.len() != fan_out
            {
                return Err(ModelError::Validation(format!(
                    "layer shape mismatch: got {}x{} with {} weights, expected {fan_in}x{fan_out}",
                    layer.fan_in,
                    layer.fan_out,
                    layer.weights.len()
                )));
            }
            params.extend_from_slice(&layer.weights);
            params.extend_from_slice(&layer.bias);
        }
        if params.len() != file.kind.param_count() {
            return Err(ModelError::Validation(format!(
                "parameter count {} (expected {})",
                params.len(),
                file.kind.param_count()
            )));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::Validation("non-finite weight".into()));
        }
        if file.damping.len() != PARAM_COUNT {
            return Err(ModelError::Validation("damping mask width".into()));
        }
        for i in 0..ONSET_FEATURE_COUNT {
            if !(file.norm_stats.min[i] < file.norm_stats.max[i]) {
                return Err(ModelError::Validation(
                    "normalization stats: min must be below max".into(),
                ));
            }
        }
        file.frame_cfg
            .validate()
            .map_err(|e| ModelError::Validation(e.to_string()))?;
        Ok(Self {
            kind: file.kind,
            params,
            damping: std::array::from_fn(|i| file.damping[i]),
            meta: ModelMeta {
                norm_stats: file.norm_stats,
                frame_cfg: file.frame_cfg,
                onset_window: file.onset_window,
                preset: file.preset,
            },
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    fan_in: usize,
    fan_out: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    schema_version: u32,
    kind: ModelKind,
    layers: Vec<LayerFile>,
    damping: Vec<f64>,
    norm_stats: NormStats,
    frame_cfg: FrameConfig,
    onset_window: usize,
    preset: Preset,
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn test_meta() -> ModelMeta {
        ModelMeta {
            norm_stats: NormStats {
                min: [0.0, 100.0, 0.0],
                max: [1.0, 8000.0, 1.0],
            },
            frame_cfg: FrameConfig::default(),
            onset_window: 256,
            preset: crate::synth::factory_presets().remove(0),
        }
    }

    #[test]
    fn parameter_counts_are_exact() {
        assert_eq!(ModelKind::Linear.param_count(), 56);
        assert_eq!(ModelKind::Mlp32.param_count(), 590);
        // (3->64) + 2x(64->64) + (64->14), all with biases: 9486, which is
        // the "9.5k" figure. No bias-bearing affine stack over these widths
        // reaches 9500 on the nose.
        assert_eq!(ModelKind::Mlp64x3.param_count(), 9486);
        for kind in [ModelKind::Linear, ModelKind::Mlp32, ModelKind::Mlp64x3] {
            let model = MappingModel::init(kind, 1, test_meta());
            assert_eq!(model.param_count(), kind.param_count());
        }
    }

    #[test]
    fn fresh_models_emit_zero_modulation() {
        for kind in [ModelKind::Linear, ModelKind::Mlp32, ModelKind::Mlp64x3] {
            let model = MappingModel::init(kind, 99, test_meta());
            for input in [[0.0, 0.0, 0.0], [0.5, 0.2, 0.9], [1.0, 1.0, 1.0]] {
                assert_eq!(model.forward(&input), [0.0; PARAM_COUNT], "{kind:?}");
            }
        }
    }

    #[test]
    fn mlp_outputs_stay_within_damping_bounds() {
        let mut model = MappingModel::init(ModelKind::Mlp32, 3, test_meta());
        // Scramble all parameters, including the head.
        let n = model.param_count();
        for (i, p) in model.params_mut().iter_mut().enumerate() {
            *p = ((i * 2654435761) % n) as f64 / n as f64 * 4.0 - 2.0;
        }
        for step in 0..20 {
            let x = step as f64 / 19.0;
            let out = model.forward(&[x, 1.0 - x, (x * 7.0).fract()]);
            for (o, d) in out.iter().zip(&model.damping) {
                // tanh saturates to exactly 1.0 in f64, so the bound is
                // inclusive at the extremes.
                assert!(o.abs() <= *d, "output {o} escaped damping bound {d}");
            }
        }
    }

    #[test]
    fn frequency_slots_are_damped() {
        let model = MappingModel::init(ModelKind::Mlp32, 3, test_meta());
        let f1 = crate::synth::ParamSlot::Osc1Freq.index();
        let f2 = crate::synth::ParamSlot::Osc2Freq.index();
        assert_eq!(model.damping[f1], 1e-3);
        assert_eq!(model.damping[f2], 1e-3);
        assert!(model.damping.iter().filter(|&&d| d == 1.0).count() == PARAM_COUNT - 2);
    }

    #[test]
    fn hand_computed_tiny_model() {
        // A 2-unit mlp32-shaped fragment is awkward; check the linear kind
        // against hand arithmetic instead, with the damping mask in play.
        let mut model = MappingModel::init(ModelKind::Linear, 0, test_meta());
        // W row 0 = [1, 2, 3], b0 = 0.5; W row 1 = [-1, 0, 1], b1 = 0.
        let params = model.params_mut();
        params[0] = 1.0;
        params[1] = 2.0;
        params[2] = 3.0;
        params[3] = -1.0;
        params[5] = 1.0;
        params[3 * 14] = 0.5; // bias of output 0
        let out = model.forward(&[0.1, 0.2, 0.3]);
        // Output 0 is an osc-frequency slot: damped by 1e-3.
        let z0 = 1.0 * 0.1 + 2.0 * 0.2 + 3.0 * 0.3 + 0.5;
        assert!((out[0] - z0 * 1e-3).abs() < 1e-15);
        let z1 = -1.0 * 0.1 + 1.0 * 0.3;
        assert!((out[1] - z1).abs() < 1e-15);
    }

    #[test]
    fn backward_matches_finite_differences() {
        for kind in [ModelKind::Linear, ModelKind::Mlp32, ModelKind::Mlp64x3] {
            let mut model = MappingModel::init(kind, 7, test_meta());
            // Non-zero head so gradients flow everywhere.
            let n = model.param_count();
            for (i, p) in model.params_mut().iter_mut().enumerate() {
                *p = (((i * 37 + 11) % n) as f64 / n as f64 - 0.5) * 0.8;
            }
            let input = [0.3, 0.6, 0.9];
            let upstream: [f64; PARAM_COUNT] =
                std::array::from_fn(|i| ((i as f64) * 0.37).sin());

            let loss = |m: &MappingModel| -> f64 {
                let out = m.forward(&input);
                out.iter().zip(&upstream).map(|(o, u)| o * u).sum()
            };
            let grads = model.backward(&input, &upstream);

            let h = 1e-6;
            // Spot-check a spread of parameters.
            for idx in (0..model.param_count()).step_by(model.param_count() / 23 + 1) {
                let mut perturbed = model.clone();
                perturbed.params_mut()[idx] += h;
                let hi = loss(&perturbed);
                perturbed.params_mut()[idx] -= 2.0 * h;
                let lo = loss(&perturbed);
                let numeric = (hi - lo) / (2.0 * h);
                let analytic = grads.params[idx];
                let denom = numeric.abs().max(analytic.abs()).max(1e-9);
                assert!(
                    (numeric - analytic).abs() / denom < 1e-4,
                    "{kind:?} param {idx}: analytic {analytic} vs numeric {numeric}"
                );
            }
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let model = MappingModel::init(ModelKind::Mlp32, 5, test_meta());
        let grads = model.backward(&[0.2, 0.4, 0.6], &[0.0; PARAM_COUNT]);
        assert!(grads.params.iter().all(|&g| g == 0.0));
        assert_eq!(grads.input, [0.0; 3]);
    }

    #[test]
    fn linear_weight_gradient_is_outer_product() {
        let mut model = MappingModel::init(ModelKind::Linear, 0, test_meta());
        for p in model.params_mut().iter_mut() {
            *p = 0.1;
        }
        let input = [0.25, 0.5, 0.75];
        let mut upstream = [0.0; PARAM_COUNT];
        upstream[2] = 2.0; // an undamped slot
        let grads = model.backward(&input, &upstream);
        // dL/dW[o][i] = upstream[o] * damping[o] * input[i]
        for i in 0..3 {
            assert!((grads.params[2 * 3 + i] - 2.0 * input[i]).abs() < 1e-15);
        }
        // Bias gradient.
        assert!((grads.params[3 * 14 + 2] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn save_load_round_trip_is_bit_exact() {
        let mut model = MappingModel::init(ModelKind::Mlp32, 17, test_meta());
        let n = model.param_count();
        for (i, p) in model.params_mut().iter_mut().enumerate() {
            *p = ((i * 2654435761) % n) as f64 / n as f64 - 0.487;
        }
        let restored = MappingModel::from_json(&model.to_json()).unwrap();
        assert_eq!(model.params(), restored.params());
        let mut rng_state = 0x12345u64;
        for _ in 0..100 {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1);
            let input = [
                (rng_state >> 11) as f64 / (1u64 << 53) as f64,
                (rng_state >> 22) as f64 / (1u64 << 42) as f64 % 1.0,
                (rng_state >> 33) as f64 / (1u64 << 31) as f64 % 1.0,
            ];
            assert_eq!(model.forward(&input), restored.forward(&input));
        }
    }

    #[test]
    fn truncated_file_is_a_schema_error() {
        let model = MappingModel::init(ModelKind::Linear, 1, test_meta());
        let json = model.to_json();
        assert!(MappingModel::from_json(&json[..json.len() / 2]).is_err());
    }

    #[test]
    fn wrong_param_count_fails_validation() {
        let model = MappingModel::init(ModelKind::Mlp32, 1, test_meta());
        let mut v: serde_json::Value = serde_json::from_str(&model.to_json()).unwrap();
        v["layers"][0]["weights"]
            .as_array_mut()
            .unwrap()
            .push(0.0.into());
        match MappingModel::from_json(&v.to_string()) {
            Err(ModelError::Validation(_)) => {}
            other => panic!("expected validation error, got {other:?}"),
        }
    }
}
