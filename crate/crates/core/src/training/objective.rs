//! The differentiable feature-difference objective and direct optimization.
//!
//! `y_hat(theta_mod) = f(g(clamp(theta_pre + theta_mod))) - f(g(theta_pre))`.
//! The reference term carries no modulation dependence, so it is rendered
//! once per objective and cached; the modulated term is rendered either in
//! plain `f64` (value only) or with dual numbers (value plus the full
//! 7x14 Jacobian in one pass).

use serde::{Deserialize, Serialize};

use crate::autodiff::Dual;
use crate::features::{extract_feature_vector, FrameConfig, FEATURE_COUNT};
use crate::synth::{render, ParamRangeTable, Preset};
use crate::training::TrainError;
use crate::PARAM_COUNT;

use super::adam::{Adam, AdamConfig};
use super::feature_difference_loss;

/// How hits are rendered when computing feature differences.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderSettings {
    pub duration_s: f64,
    pub sample_rate: f64,
    pub noise_seed: u64,
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self {
            duration_s: 0.5,
            sample_rate: 48000.0,
            noise_seed: 0,
        }
    }
}

/// A preset plus cached reference features; the unit of work for both
/// direct optimization and model training.
pub struct FeatureObjective {
    theta_pre: [f64; PARAM_COUNT],
    ranges: ParamRangeTable,
    render: RenderSettings,
    frame_cfg: FrameConfig,
    reference_features: [f64; FEATURE_COUNT],
}

impl FeatureObjective {
    pub fn new(
        preset: &Preset,
        ranges: ParamRangeTable,
        render_settings: RenderSettings,
        frame_cfg: FrameConfig,
    ) -> Result<Self, TrainError> {
        let theta_pre = preset.theta_pre.0;
        let reference = render(
            &theta_pre,
            &ranges,
            render_settings.duration_s,
            render_settings.sample_rate,
            render_settings.noise_seed,
        )?;
        let extraction =
            extract_feature_vector(&reference, &frame_cfg, render_settings.sample_rate)?;
        Ok(Self {
            theta_pre,
            ranges,
            render: render_settings,
            frame_cfg,
            reference_features: extraction.features,
        })
    }

    pub fn reference_features(&self) -> [f64; FEATURE_COUNT] {
        self.reference_features
    }

    pub fn render_settings(&self) -> RenderSettings {
        self.render
    }

    /// Value-only feature difference. Uses the same generic pipeline as the
    /// dual path, so `y_hat(0)` is exactly zero.
    pub fn y_hat(&self, theta_mod: &[f64; PARAM_COUNT]) -> Result<[f64; FEATURE_COUNT], TrainError> {
        let theta: [f64; PARAM_COUNT] =
            std::array::from_fn(|i| (self.theta_pre[i] + theta_mod[i]).clamp(0.0, 1.0));
        let audio = render(
            &theta,
            &self.ranges,
            self.render.duration_s,
            self.render.sample_rate,
            self.render.noise_seed,
        )?;
        let features = extract_feature_vector(&audio, &self.frame_cfg, self.render.sample_rate)?;
        Ok(std::array::from_fn(|i| {
            features.features[i] - self.reference_features[i]
        }))
    }

    /// Feature difference plus its Jacobian with respect to `theta_mod`,
    /// from one dual-valued render. `jacobian[i][j] = d y_hat_i / d theta_mod_j`.
    #[allow(clippy::type_complexity)]
    pub fn y_hat_with_jacobian(
        &self,
        theta_mod: &[f64; PARAM_COUNT],
    ) -> Result<([f64; FEATURE_COUNT], [[f64; PARAM_COUNT]; FEATURE_COUNT]), TrainError> {
        use crate::autodiff::Scalar;
        let theta: [Dual<PARAM_COUNT>; PARAM_COUNT] = std::array::from_fn(|i| {
            (Dual::constant(self.theta_pre[i]) + Dual::seeded(theta_mod[i], i)).clamp01()
        });
        let audio = render(
            &theta,
            &self.ranges,
            self.render.duration_s,
            self.render.sample_rate,
            self.render.noise_seed,
        )?;
        let features = extract_feature_vector(&audio, &self.frame_cfg, self.render.sample_rate)?;
        let mut value = [0.0; FEATURE_COUNT];
        let mut jacobian = [[0.0; PARAM_COUNT]; FEATURE_COUNT];
        for i in 0..FEATURE_COUNT {
            value[i] = features.features[i].value - self.reference_features[i];
            jacobian[i] = features.features[i].tangent;
        }
        Ok((value, jacobian))
    }
}

#[derive(Clone, Debug)]
pub struct DirectOptConfig {
    /// Learning-rate phases `(lr, iterations, continue_from_best)`. A phase
    /// either restarts from the zero modulation or continues from the best
    /// iterate so far, always with a fresh optimizer, and runs only while
    /// the target loss is unreached; the best iterate over all phases wins.
    /// Two restart scales cover the two observed failure modes (small steps
    /// get trapped early, large steps overshoot into clamp plateaus);
    /// continuation phases at small rates polish the endgame.
    pub phases: Vec<(f64, usize, bool)>,
    pub adam: AdamConfig,
    /// Stop early once the loss falls to this value.
    pub target_loss: Option<f64>,
    /// Halve the learning rate after this many iterations without a new
    /// best loss.
    pub plateau_patience: usize,
    /// Per-slot gradient scaling; oscillator-frequency slots are damped.
    pub damping: [f64; PARAM_COUNT],
}

impl Default for DirectOptConfig {
    fn default() -> Self {
        Self {
            phases: vec![(0.01, 125, false), (0.02, 125, false)],
            adam: AdamConfig::default(),
            target_loss: None,
            plateau_patience: 15,
            damping: {
                let mut mask = [1.0; PARAM_COUNT];
                mask[crate::synth::ParamSlot::Osc1Freq.index()] = crate::models::FREQ_DAMPING;
                mask[crate::synth::ParamSlot::Osc2Freq.index()] = crate::models::FREQ_DAMPING;
                mask
            },
        }
    }
}

#[derive(Clone, Debug)]
pub struct DirectOptResult {
    pub theta_mod: [f64; PARAM_COUNT],
    pub loss: f64,
    pub initial_loss: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
}

/// Optimize a modulation vector to match a target feature difference.
///
/// Gradient descent (Adam) on `theta_mod` starting from zero; the gradient
/// is the L1 subgradient chained through the render Jacobian, with the
/// frequency slots damped. Returns the best iterate seen across all
/// learning-rate phases; the total iteration budget is the sum of the
/// phase budgets (250 by default).
pub fn direct_optimize(
    objective: &FeatureObjective,
    y_target: &[f64; FEATURE_COUNT],
    cfg: &DirectOptConfig,
) -> Result<DirectOptResult, TrainError> {
    let mut best = [0.0; PARAM_COUNT];
    let mut best_loss = f64::INFINITY;
    let mut initial_loss = None;
    let mut history = Vec::new();

    'phases: for &(lr, iters, from_best) in &cfg.phases {
        let mut theta_mod = if from_best && best_loss.is_finite() {
            best
        } else {
            [0.0; PARAM_COUNT]
        };
        let mut adam = Adam::new(cfg.adam, PARAM_COUNT);
        let mut schedule =
            super::adam::PlateauSchedule::new(lr, cfg.plateau_patience.max(1), 0.5);

        for _ in 0..iters {
            let (y_hat, jacobian) = objective.y_hat_with_jacobian(&theta_mod)?;
            let loss = feature_difference_loss(&y_hat, y_target);
            if !loss.is_finite() {
                return Err(TrainError::Diverged {
                    iteration: history.len(),
                });
            }
            history.push(loss);
            if initial_loss.is_none() {
                initial_loss = Some(loss);
            }
            if loss < best_loss {
                best_loss = loss;
                best = theta_mod;
            }
            if let Some(target) = cfg.target_loss {
                if best_loss <= target {
                    break 'phases;
                }
            }

            // L1 subgradient (zero at exact matches) through the Jacobian.
            let mut grad = [0.0; PARAM_COUNT];
            for i in 0..FEATURE_COUNT {
                let residual = y_hat[i] - y_target[i];
                let sign = if residual > 0.0 {
                    1.0
                } else if residual < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                for j in 0..PARAM_COUNT {
                    grad[j] += sign * jacobian[i][j];
                }
            }
            for j in 0..PARAM_COUNT {
                grad[j] *= cfg.damping[j];
            }
            let step_lr = schedule.observe(loss);
            adam.step(&mut theta_mod, &grad, step_lr);
        }
    }

    Ok(DirectOptResult {
        theta_mod: best,
        loss: best_loss,
        initial_loss: initial_loss.unwrap_or(0.0),
        iterations: history.len(),
        history,
    })
}
