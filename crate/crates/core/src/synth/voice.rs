//! Sample-by-sample snare voice and the offline render built on it.
//!
//! There is exactly one synthesis code path: the real-time engine pulls
//! samples from a [`SnareVoice<f64>`] block by block, and [`render`] collects
//! samples from the same voice type (over any [`Scalar`] field), so offline
//! and streaming output are identical by construction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Scalar;
use crate::PARAM_COUNT;

use super::{denormalize_slot, highpass_coefficients, Biquad, ParamRangeTable, SynthError};

const LN_1000: f64 = 6.907755278982137; // -60 dB point of the decay envelopes

/// Synthesizer controls in physical units (Hz, seconds, plain gains).
#[derive(Clone, Copy, Debug)]
pub struct PhysicalParams<T: Scalar> {
    pub osc1_freq: T,
    pub osc1_fm_amount: T,
    pub osc1_gain: T,
    pub osc1_amp_decay: T,
    pub osc2_freq: T,
    pub osc2_fm_amount: T,
    pub osc2_gain: T,
    pub osc2_amp_decay: T,
    pub freq_env_decay: T,
    pub noise_gain: T,
    pub noise_amp_decay: T,
    pub hpf_cutoff: T,
    pub hpf_q: T,
    pub shaper_drive: T,
}

impl<T: Scalar> PhysicalParams<T> {
    /// Longest amplitude decay, for voice lifetime bookkeeping.
    pub fn max_amp_decay(&self) -> f64 {
        self.osc1_amp_decay
            .value()
            .max(self.osc2_amp_decay.value())
            .max(self.noise_amp_decay.value())
    }
}

/// Map a normalized parameter vector into physical units. Components are
/// clamped to `[0, 1]` first.
pub fn denormalize<T: Scalar>(
    theta: &[T; PARAM_COUNT],
    ranges: &ParamRangeTable,
) -> PhysicalParams<T> {
    let d = |i: usize| denormalize_slot(theta[i].clamp01(), &ranges.0[i]);
    PhysicalParams {
        osc1_freq: d(0),
        osc1_fm_amount: d(1),
        osc1_gain: d(2),
        osc1_amp_decay: d(3),
        osc2_freq: d(4),
        osc2_fm_amount: d(5),
        osc2_gain: d(6),
        osc2_amp_decay: d(7),
        freq_env_decay: d(8),
        noise_gain: d(9),
        noise_amp_decay: d(10),
        hpf_cutoff: d(11),
        hpf_q: d(12),
        shaper_drive: d(13),
    }
}

/// Exponentially decaying envelope reaching -60 dB (1/1000) exactly at
/// `decay_time`: `e[t] = exp(-t * ln(1000) / (sr * decay_time))`, `e[0] = 1`.
pub fn exp_envelope(decay_time: f64, n: usize, sample_rate: f64) -> Result<Vec<f64>, SynthError> {
    if !(decay_time > 0.0) {
        return Err(SynthError::InvalidDecay(decay_time));
    }
    let rate = -LN_1000 / (sample_rate * decay_time);
    Ok((0..n).map(|t| (rate * t as f64).exp()).collect())
}

/// One snare hit being synthesized, one sample at a time.
#[derive(Clone, Debug)]
pub struct SnareVoice<T: Scalar> {
    phase1: T,
    phase2: T,
    phase_step1: T, // 2*pi*f/sr, before FM
    phase_step2: T,
    fm1: T,
    fm2: T,
    gain1: T,
    gain2: T,
    noise_gain: T,
    amp1_rate: T, // per-sample envelope exponents
    amp2_rate: T,
    noise_rate: T,
    freq_rate: T,
    drive: T,
    inv_tanh_drive: T,
    hpf: Biquad<T>,
    noise: ChaCha8Rng,
    n: u64,
}

impl<T: Scalar> SnareVoice<T> {
    pub fn new(
        params: &PhysicalParams<T>,
        sample_rate: f64,
        noise_seed: u64,
    ) -> Result<Self, SynthError> {
        let env_rate = |decay: T| decay.recip().scale(-LN_1000 / sample_rate);
        let (b0, b1, b2, a1, a2) =
            highpass_coefficients(params.hpf_cutoff, params.hpf_q, sample_rate)?;
        let drive = params.shaper_drive;
        Ok(Self {
            phase1: T::zero(),
            phase2: T::zero(),
            phase_step1: params
                .osc1_freq
                .scale(2.0 * std::f64::consts::PI / sample_rate),
            phase_step2: params
                .osc2_freq
                .scale(2.0 * std::f64::consts::PI / sample_rate),
            fm1: params.osc1_fm_amount,
            fm2: params.osc2_fm_amount,
            gain1: params.osc1_gain,
            gain2: params.osc2_gain,
            noise_gain: params.noise_gain,
            amp1_rate: env_rate(params.osc1_amp_decay),
            amp2_rate: env_rate(params.osc2_amp_decay),
            noise_rate: env_rate(params.noise_amp_decay),
            freq_rate: env_rate(params.freq_env_decay),
            drive,
            inv_tanh_drive: drive.tanh().recip(),
            hpf: Biquad::new(b0, b1, b2, a1, a2),
            noise: ChaCha8Rng::seed_from_u64(noise_seed),
            n: 0,
        })
    }

    #[inline]
    pub fn next_sample(&mut self) -> T {
        let t = self.n as f64;
        self.n += 1;

        let freq_env = self.freq_rate.scale(t).exp();

        // Oscillators: instantaneous frequency f*(1 + fm*env), running phase.
        let s1 = self.phase1.sin();
        self.phase1 = self.phase1 + self.phase_step1 * (self.fm1 * freq_env).offset(1.0);
        let osc1 = self.gain1 * self.amp1_rate.scale(t).exp() * s1;

        let s2 = self.phase2.sin();
        self.phase2 = self.phase2 + self.phase_step2 * (self.fm2 * freq_env).offset(1.0);
        let osc2 = self.gain2 * self.amp2_rate.scale(t).exp() * s2;

        // Seeded uniform white noise in [-1, 1], high-pass filtered. The
        // noise samples are constants; tangents enter through the filter
        // coefficients and the gain/envelope.
        let white = self.noise.gen::<f64>() * 2.0 - 1.0;
        let filtered = self.hpf.process(T::from_f64(white));
        let noise = self.noise_gain * self.noise_rate.scale(t).exp() * filtered;

        let mix = osc1 + osc2 + noise;
        (self.drive * mix).tanh() * self.inv_tanh_drive
    }
}

/// Render `duration` seconds of one hit from normalized parameters.
///
/// Fully deterministic: `(theta, duration, sample_rate, noise_seed)`
/// determine every sample. The tanh stage is normalized by `tanh(drive)` so
/// peak scale does not collapse at low drive; output stays in `(-1, 1)`.
pub fn render<T: Scalar>(
    theta: &[T; PARAM_COUNT],
    ranges: &ParamRangeTable,
    duration: f64,
    sample_rate: f64,
    noise_seed: u64,
) -> Result<Vec<T>, SynthError> {
    if !(duration > 0.0) {
        return Err(SynthError::InvalidDuration(duration));
    }
    let n = (duration * sample_rate).round() as usize;
    let params = denormalize(theta, ranges);
    let mut voice = SnareVoice::new(&params, sample_rate, noise_seed)?;
    Ok((0..n).map(|_| voice.next_sample()).collect())
}
