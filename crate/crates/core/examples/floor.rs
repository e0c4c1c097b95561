//! Scratch: per-record direct sc_t errors and reference identity.

use rayon::prelude::*;
use snaremap_core::dataset::{build_manifest, DatasetConfig, Split};
use snaremap_core::synth::{factory_presets, ParamRangeTable};
use snaremap_core::synthetic::synthetic_performance;
use snaremap_core::training::{
    direct_optimize, DirectOptConfig, FeatureObjective, RenderSettings,
};

fn main() {
    let sr = 32000.0;
    let preset = factory_presets().remove(0);
    let perf = synthetic_performance(&preset, 80, sr, 1234);
    // which hit is unmodulated?
    let anchor = perf
        .theta_mods
        .iter()
        .position(|m| m.iter().all(|&x| x == 0.0))
        .unwrap();
    let cfg = DatasetConfig {
        hit_length_s: 0.35,
        ..DatasetConfig::default()
    };
    let manifest = build_manifest(&perf.signal, sr, &cfg, "synthetic-80").unwrap();
    println!("anchor hit {anchor}, reference hit {}", manifest.reference_hit);

    let render = RenderSettings {
        duration_s: 0.35,
        sample_rate: sr,
        noise_seed: 9999,
    };
    let objective =
        FeatureObjective::new(&preset, ParamRangeTable::default(), render, manifest.frame_cfg)
            .unwrap();
    let test: Vec<_> = manifest.records_in(Split::Test).cloned().collect();
    let rows: Vec<(usize, f64, f64, f64)> = test
        .par_iter()
        .map(|r| {
            let result = direct_optimize(
                &objective,
                &r.y,
                &DirectOptConfig {
                    phases: vec![(0.01, 150, false), (0.02, 150, false), (0.002, 150, true), (0.0005, 150, true)],
                    target_loss: Some(0.01),
                    ..DirectOptConfig::default()
                },
            )
            .unwrap();
            let y_hat = objective.y_hat(&result.theta_mod).unwrap();
            (r.hit_id, result.loss, (y_hat[2] - r.y[2]).abs(), r.y[2])
        })
        .collect();
    for (hit, loss, sc_err, y_sc) in &rows {
        println!("hit {hit:>2}: total loss {loss:.4}  sc_t err {sc_err:.4}  y_sc_t {y_sc:+.3}");
    }
    let mean_sc: f64 = rows.iter().map(|r| r.2).sum::<f64>() / rows.len() as f64;
    let base_sc: f64 = rows.iter().map(|r| r.3.abs()).sum::<f64>() / rows.len() as f64;
    println!("mean sc_t err {mean_sc:.4} vs baseline {base_sc:.4} -> ratio {:.1}%", 100.0*mean_sc/base_sc);
}
