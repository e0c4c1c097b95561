//! Mapping-model training and Table-style evaluation.
//!
//! The loop ties everything together: normalized onset features go through
//! the model to predict a modulation, the modulated preset is rendered and
//! its feature difference compared against the target with an L1 loss, and
//! the loss gradient flows back through the render Jacobian into the model
//! weights. A plateau schedule halves the learning rate when validation
//! stalls, and the best-validation weights are kept.

mod adam;
mod objective;

pub use adam::{Adam, AdamConfig, PlateauSchedule};
pub use objective::{
    direct_optimize, DirectOptConfig, DirectOptResult, FeatureObjective, RenderSettings,
};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DatasetManifest, Split};
use crate::features::{FEATURE_COUNT, FEATURE_NAMES, ONSET_FEATURE_COUNT};
use crate::models::{MappingModel, ModelKind, ModelMeta};
use crate::synth::{ParamRangeTable, Preset};
use crate::PARAM_COUNT;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("optimization diverged (non-finite loss) at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error("the {0:?} split is empty")]
    EmptySplit(Split),
    #[error(transparent)]
    Synth(#[from] crate::synth::SynthError),
    #[error(transparent)]
    Feature(#[from] crate::features::FeatureError),
}

/// Sum of absolute componentwise differences (batch losses are averaged by
/// the caller).
pub fn feature_difference_loss(y_hat: &[f64; FEATURE_COUNT], y: &[f64; FEATURE_COUNT]) -> f64 {
    y_hat
        .iter()
        .zip(y.iter())
        .map(|(a, b)| (a - b).abs())
        .sum()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub seed: u64,
    /// Evaluate batch items on multiple threads. Gradients are reduced in
    /// index order either way, so results match single-worker mode.
    pub parallel: bool,
    pub render: RenderSettings,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 250,
            batch_size: 32,
            adam: AdamConfig::default(),
            plateau_patience: 20,
            plateau_factor: 0.5,
            seed: 0,
            parallel: false,
            render: RenderSettings::default(),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Entry 0 is the pre-training loss (zero-initialized model), so it
    /// equals the preset baseline by construction.
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub lr: Vec<f64>,
    pub best_epoch: usize,
}

struct Example {
    input: [f64; ONSET_FEATURE_COUNT],
    y: [f64; FEATURE_COUNT],
}

fn collect_examples(manifest: &DatasetManifest, split: Split) -> Vec<Example> {
    manifest
        .records_in(split)
        .map(|r| Example {
            input: manifest.norm_stats.normalize(r.onset_features.as_array()),
            y: r.y,
        })
        .collect()
}

fn mean_split_loss(
    model: &MappingModel,
    objective: &FeatureObjective,
    examples: &[Example],
    parallel: bool,
) -> Result<f64, TrainError> {
    let eval = |ex: &Example| -> Result<f64, TrainError> {
        let theta_mod = model.forward(&ex.input);
        let y_hat = objective.y_hat(&theta_mod)?;
        Ok(feature_difference_loss(&y_hat, &ex.y))
    };
    let losses: Result<Vec<f64>, TrainError> = if parallel {
        examples.par_iter().map(eval).collect()
    } else {
        examples.iter().map(eval).collect()
    };
    Ok(losses?.iter().sum::<f64>() / examples.len() as f64)
}

/// Train a mapping model on one performance manifest.
pub fn train_mapping(
    manifest: &DatasetManifest,
    preset: &Preset,
    kind: ModelKind,
    cfg: &TrainConfig,
) -> Result<(MappingModel, TrainHistory), TrainError> {
    let train = collect_examples(manifest, Split::Train);
    let val = collect_examples(manifest, Split::Val);
    if train.is_empty() {
        return Err(TrainError::EmptySplit(Split::Train));
    }
    if val.is_empty() {
        return Err(TrainError::EmptySplit(Split::Val));
    }

    let objective = FeatureObjective::new(
        preset,
        ParamRangeTable::default(),
        cfg.render,
        manifest.frame_cfg,
    )?;

    let meta = ModelMeta {
        norm_stats: manifest.norm_stats,
        frame_cfg: manifest.frame_cfg,
        onset_window: manifest.onset_window,
        preset: preset.clone(),
    };
    let mut model = MappingModel::init(kind, cfg.seed, meta);
    let mut adam = Adam::new(cfg.adam, model.param_count());
    let mut schedule = PlateauSchedule::new(cfg.adam.lr, cfg.plateau_patience, cfg.plateau_factor);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));

    let mut history = TrainHistory::default();

    // Epoch 0: the fresh model emits zero modulation, so this is the
    // preset baseline.
    let initial_train = mean_split_loss(&model, &objective, &train, cfg.parallel)?;
    let initial_val = mean_split_loss(&model, &objective, &val, cfg.parallel)?;
    history.train_loss.push(initial_train);
    history.val_loss.push(initial_val);
    history.lr.push(schedule.lr());

    let mut best_params = model.params().to_vec();
    let mut best_val = initial_val;
    history.best_epoch = 0;

    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut lr = schedule.lr();
        let mut epoch_loss = 0.0;

        for batch in order.chunks(cfg.batch_size) {
            let per_item = |&idx: &usize| -> Result<(f64, Vec<f64>), TrainError> {
                let ex = &train[idx];
                let theta_mod = model.forward(&ex.input);
                let (y_hat, jacobian) = objective.y_hat_with_jacobian(&theta_mod)?;
                let loss = feature_difference_loss(&y_hat, &ex.y);
                // dL/d theta_mod = J^T sign(y_hat - y), scaled by 1/batch.
                let mut upstream = [0.0; PARAM_COUNT];
                for i in 0..FEATURE_COUNT {
                    let residual = y_hat[i] - ex.y[i];
                    let sign = if residual > 0.0 {
                        1.0
                    } else if residual < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    for j in 0..PARAM_COUNT {
                        upstream[j] += sign * jacobian[i][j];
                    }
                }
                let scale = 1.0 / batch.len() as f64;
                for u in upstream.iter_mut() {
                    *u *= scale;
                }
                let grads = model.backward(&ex.input, &upstream);
                Ok((loss, grads.params))
            };

            let results: Result<Vec<(f64, Vec<f64>)>, TrainError> = if cfg.parallel {
                batch.par_iter().map(per_item).collect()
            } else {
                batch.iter().map(per_item).collect()
            };
            let results = results?;

            // Reduce in index order: deterministic in both modes.
            let mut grad = vec![0.0; model.param_count()];
            for (loss, item_grad) in &results {
                epoch_loss += loss;
                for (g, ig) in grad.iter_mut().zip(item_grad) {
                    *g += ig;
                }
            }
            if !epoch_loss.is_finite() {
                return Err(TrainError::Diverged { iteration: epoch });
            }
            adam.step(model.params_mut(), &grad, lr);
        }

        let val_loss = mean_split_loss(&model, &objective, &val, cfg.parallel)?;
        history.train_loss.push(epoch_loss / train.len() as f64);
        history.val_loss.push(val_loss);
        lr = schedule.observe(val_loss);
        history.lr.push(lr);

        if val_loss < best_val {
            best_val = val_loss;
            best_params.copy_from_slice(model.params());
            history.best_epoch = epoch;
        }
    }

    model.set_params(&best_params);
    Ok((model, history))
}

/// Per-feature mean and standard deviation of `|y_hat_i - y_i|` on the test
/// split, with the zero-modulation preset baseline alongside.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub feature_names: Vec<String>,
    pub model_mean: [f64; FEATURE_COUNT],
    pub model_std: [f64; FEATURE_COUNT],
    pub baseline_mean: [f64; FEATURE_COUNT],
    pub baseline_std: [f64; FEATURE_COUNT],
    pub n_test: usize,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Evaluate a trained model on the manifest's test split, using the preset
/// and feature configuration embedded in the model.
pub fn evaluate(
    model: &MappingModel,
    manifest: &DatasetManifest,
    render: RenderSettings,
    parallel: bool,
) -> Result<EvalReport, TrainError> {
    let test = collect_examples(manifest, Split::Test);
    if test.is_empty() {
        return Err(TrainError::EmptySplit(Split::Test));
    }
    let objective = FeatureObjective::new(
        &model.meta.preset,
        ParamRangeTable::default(),
        render,
        model.meta.frame_cfg,
    )?;

    let per_record = |ex: &Example| -> Result<[f64; FEATURE_COUNT], TrainError> {
        let theta_mod = model.forward(&ex.input);
        let y_hat = objective.y_hat(&theta_mod)?;
        Ok(std::array::from_fn(|i| (y_hat[i] - ex.y[i]).abs()))
    };
    let model_errors: Result<Vec<_>, TrainError> = if parallel {
        test.par_iter().map(per_record).collect()
    } else {
        test.iter().map(per_record).collect()
    };
    let model_errors = model_errors?;

    // Baseline: theta_mod = 0, so y_hat = 0 and the error is |y| itself.
    let baseline_errors: Vec<[f64; FEATURE_COUNT]> = test
        .iter()
        .map(|ex| std::array::from_fn(|i| ex.y[i].abs()))
        .collect();

    let mut report = EvalReport {
        feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        model_mean: [0.0; FEATURE_COUNT],
        model_std: [0.0; FEATURE_COUNT],
        baseline_mean: [0.0; FEATURE_COUNT],
        baseline_std: [0.0; FEATURE_COUNT],
        n_test: test.len(),
    };
    for i in 0..FEATURE_COUNT {
        let m: Vec<f64> = model_errors.iter().map(|e| e[i]).collect();
        let b: Vec<f64> = baseline_errors.iter().map(|e| e[i]).collect();
        (report.model_mean[i], report.model_std[i]) = mean_std(&m);
        (report.baseline_mean[i], report.baseline_std[i]) = mean_std(&b);
    }
    Ok(report)
}

impl EvalReport {
    /// Aligned text table: feature rows, method columns.
    pub fn table(&self, model_label: &str) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<8} {:>20} {:>20}\n",
            "Feature", "Preset", model_label
        ));
        for i in 0..FEATURE_COUNT {
            out.push_str(&format!(
                "{:<8} {:>12.3} ± {:<5.2} {:>12.3} ± {:<5.2}\n",
                self.feature_names[i],
                self.baseline_mean[i],
                self.baseline_std[i],
                self.model_mean[i],
                self.model_std[i],
            ));
        }
        out
    }
}
