//! Differentiable snare-drum synthesis and timbre remapping.
//!
//! The crate implements a TR-808-style snare synthesizer whose fourteen
//! normalized parameters can be differentiated end-to-end through a
//! perceptually scaled audio feature extractor. On top of that sit tools for
//! turning a recorded drum performance into a dataset of timbre analogies,
//! training small models that map onset features to parameter modulations,
//! and a real-time engine that applies a trained mapping to live audio.

pub mod autodiff;
pub mod dataset;
pub mod engine;
pub mod features;
pub mod models;
pub mod onsets;
pub mod synth;
pub mod synthetic;
pub mod training;
pub mod wav;

/// Number of normalized synthesizer parameters.
pub const PARAM_COUNT: usize = 14;

/// Dual number with one tangent lane per synthesizer parameter.
pub type ParamDual = autodiff::Dual<PARAM_COUNT>;
