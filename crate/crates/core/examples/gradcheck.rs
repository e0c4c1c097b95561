//! Scratch diagnostic: desk-scale table ordering (direct vs models vs preset).

use rayon::prelude::*;
use snaremap_core::dataset::{build_manifest, DatasetConfig, Split};
use snaremap_core::features::{FEATURE_COUNT, FEATURE_NAMES};
use snaremap_core::models::ModelKind;
use snaremap_core::synth::{factory_presets, ParamRangeTable};
use snaremap_core::synthetic::synthetic_performance;
use snaremap_core::training::{
    direct_optimize, evaluate, train_mapping, DirectOptConfig, FeatureObjective, RenderSettings,
    TrainConfig,
};

fn main() {
    let sr = 32000.0;
    let preset = factory_presets().remove(0);
    let t0 = std::time::Instant::now();
    let perf = synthetic_performance(&preset, 80, sr, 1234);
    println!("perf: {} samples, {:.1}s", perf.signal.len(), t0.elapsed().as_secs_f64());

    let cfg = DatasetConfig {
        hit_length_s: 0.35,
        ..DatasetConfig::default()
    };
    let manifest = build_manifest(&perf.signal, sr, &cfg, "synthetic-80").unwrap();
    println!(
        "manifest: {} records ({} dropped, {} padded), ref hit {} | {:.1}s",
        manifest.records.len(),
        manifest.dropped,
        manifest.padded,
        manifest.reference_hit,
        t0.elapsed().as_secs_f64()
    );

    let render = RenderSettings {
        duration_s: 0.35,
        sample_rate: sr,
        noise_seed: 9999,
    };

    // Direct optimization on each test record.
    let objective =
        FeatureObjective::new(&preset, ParamRangeTable::default(), render, manifest.frame_cfg)
            .unwrap();
    let test_records: Vec<_> = manifest.records_in(Split::Test).cloned().collect();
    println!("test split: {}", test_records.len());
    let direct_errors: Vec<[f64; FEATURE_COUNT]> = test_records
        .par_iter()
        .map(|r| {
            let initial: f64 = r.y.iter().map(|v| v.abs()).sum();
            let cfg = DirectOptConfig {
                target_loss: Some(0.0002 * initial),
                phases: vec![(0.01, 150, false), (0.02, 150, false), (0.002, 150, true), (0.0005, 150, true)],
                ..DirectOptConfig::default()
            };
            let result = direct_optimize(&objective, &r.y, &cfg).unwrap();
            let y_hat = objective.y_hat(&result.theta_mod).unwrap();
            std::array::from_fn(|i| (y_hat[i] - r.y[i]).abs())
        })
        .collect();
    let direct_mean: [f64; FEATURE_COUNT] = std::array::from_fn(|i| {
        direct_errors.iter().map(|e| e[i]).sum::<f64>() / direct_errors.len() as f64
    });
    println!("direct done | {:.1}s", t0.elapsed().as_secs_f64());

    // Train the three model kinds.
    let mut rows: Vec<(String, [f64; FEATURE_COUNT])> = Vec::new();
    let mut baseline = None;
    for kind in [ModelKind::Linear, ModelKind::Mlp32, ModelKind::Mlp64x3] {
        let tcfg = TrainConfig {
            epochs: 80,
            batch_size: 16,
            seed: 7,
            parallel: true,
            render,
            ..TrainConfig::default()
        };
        let (model, history) = train_mapping(&manifest, &preset, kind, &tcfg).unwrap();
        let report = evaluate(&model, &manifest, render, true).unwrap();
        println!(
            "{}: val {:.3} -> best {:.3} (epoch {}) | {:.1}s",
            kind.name(),
            history.val_loss[0],
            history.val_loss[history.best_epoch],
            history.best_epoch,
            t0.elapsed().as_secs_f64()
        );
        rows.push((kind.name().to_string(), report.model_mean));
        baseline = Some(report.baseline_mean);
    }

    let baseline = baseline.unwrap();
    println!("\n{:<8} {:>9} {:>9} {:>9} {:>9} {:>9}", "feature", "preset", "direct", "linear", "mlp32", "mlp64x3");
    for i in 0..FEATURE_COUNT {
        println!(
            "{:<8} {:>9.3} {:>9.3} {:>9.3} {:>9.3} {:>9.3}",
            FEATURE_NAMES[i], baseline[i], direct_mean[i], rows[0].1[i], rows[1].1[i], rows[2].1[i]
        );
    }
    let mut ok = 0;
    for i in 0..FEATURE_COUNT {
        let models_ok = rows.iter().all(|(_, m)| m[i] < baseline[i]);
        let direct_ok = rows.iter().all(|(_, m)| direct_mean[i] < m[i]);
        if models_ok && direct_ok {
            ok += 1;
        }
    }
    println!("\nfull ordering holds on {ok}/7 features");
    println!("sc_t: direct {:.4} vs 10% of baseline {:.4}", direct_mean[2], 0.1 * baseline[2]);
    println!("total {:.1}s", t0.elapsed().as_secs_f64());
}
