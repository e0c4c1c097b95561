//! Windowed magnitude spectra and their summary statistics.

use crate::autodiff::Scalar;

use super::FeatureError;

/// Floor applied to spectral magnitudes inside the flatness geometric mean,
/// keeping gradients finite on near-silent bins.
const FLATNESS_EPS: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WindowKind {
    /// Five-term flat-top window; wide main lobe, very low sidelobes.
    FlatTop,
    Hann,
}

/// Periodic window of length `n`.
pub fn window(kind: WindowKind, n: usize) -> Vec<f64> {
    let step = 2.0 * std::f64::consts::PI / n as f64;
    match kind {
        WindowKind::FlatTop => {
            const A: [f64; 5] = [
                0.21557895,
                0.41663158,
                0.277263158,
                0.083578947,
                0.006947368,
            ];
            (0..n)
                .map(|i| {
                    let x = step * i as f64;
                    A[0] - A[1] * x.cos() + A[2] * (2.0 * x).cos() - A[3] * (3.0 * x).cos()
                        + A[4] * (4.0 * x).cos()
                })
                .collect()
        }
        WindowKind::Hann => (0..n)
            .map(|i| 0.5 - 0.5 * (step * i as f64).cos())
            .collect(),
    }
}

#[inline]
fn magnitude<T: Scalar>(re: T, im: T) -> T {
    let power = re * re + im * im;
    // sqrt is not differentiable at zero; an exactly-silent bin gets the
    // zero subgradient.
    if power.value() == 0.0 {
        T::zero()
    } else {
        power.sqrt()
    }
}

/// Windowed, zero-padded magnitude frames of `signal`.
///
/// Frame `i` covers samples `[i*hop, i*hop + frame_len)`. Each frame is
/// multiplied by `window`, padded to `fft_size`, transformed, and reduced to
/// bin magnitudes. When `compress` is set the magnitudes pass through
/// `ln(1 + X)`, which smooths gradients for spectral statistics.
pub fn magnitude_frames<T: Scalar>(
    signal: &[T],
    frame_len: usize,
    hop: usize,
    fft_size: usize,
    window: &[f64],
    n_frames: usize,
    compress: bool,
) -> Vec<Vec<T>> {
    assert_eq!(window.len(), frame_len, "window/frame length mismatch");
    assert!(
        signal.len() >= (n_frames - 1) * hop + frame_len,
        "signal shorter than the requested frames"
    );
    let mut frames = Vec::with_capacity(n_frames);
    let mut windowed = vec![T::zero(); frame_len];
    for f in 0..n_frames {
        let start = f * hop;
        for (j, slot) in windowed.iter_mut().enumerate() {
            *slot = signal[start + j].scale(window[j]);
        }
        let spectrum = T::rfft(&windowed, fft_size);
        let mags: Vec<T> = spectrum
            .into_iter()
            .map(|(re, im)| {
                let m = magnitude(re, im);
                if compress {
                    m.ln_1p()
                } else {
                    m
                }
            })
            .collect();
        frames.push(mags);
    }
    frames
}

fn frame_has_energy<T: Scalar>(frame: &[T]) -> bool {
    frame.iter().any(|m| m.value() > 0.0)
}

/// Amplitude-weighted mean bin frequency in Hz, averaged over frames.
///
/// Frames with no energy are excluded; if every frame is silent the segment
/// cannot be summarized and an error is returned.
pub fn mean_spectral_centroid<T: Scalar>(
    frames: &[Vec<T>],
    sample_rate: f64,
    fft_size: usize,
) -> Result<T, FeatureError> {
    let bin_hz = sample_rate / fft_size as f64;
    let mut acc = T::zero();
    let mut used = 0usize;
    for frame in frames {
        if !frame_has_energy(frame) {
            continue;
        }
        let mut weighted = T::zero();
        let mut total = T::zero();
        for (k, &m) in frame.iter().enumerate() {
            weighted = weighted + m.scale(k as f64 * bin_hz);
            total = total + m;
        }
        acc = acc + weighted / total;
        used += 1;
    }
    if used == 0 {
        return Err(FeatureError::SilentSegment);
    }
    Ok(acc.scale(1.0 / used as f64))
}

/// Geometric-to-arithmetic mean ratio per frame, averaged over frames.
/// 1 means flat (noise-like), values near 0 mean tonal.
pub fn mean_spectral_flatness<T: Scalar>(frames: &[Vec<T>]) -> Result<T, FeatureError> {
    let mut acc = T::zero();
    let mut used = 0usize;
    for frame in frames {
        if !frame_has_energy(frame) {
            continue;
        }
        let inv_n = 1.0 / frame.len() as f64;
        let mut log_sum = T::zero();
        let mut lin_sum = T::zero();
        for &m in frame {
            let floored = m.max_const(FLATNESS_EPS);
            log_sum = log_sum + floored.ln();
            lin_sum = lin_sum + floored;
        }
        let geometric = log_sum.scale(inv_n).exp();
        let arithmetic = lin_sum.scale(inv_n);
        acc = acc + geometric / arithmetic;
        used += 1;
    }
    if used == 0 {
        return Err(FeatureError::SilentSegment);
    }
    Ok(acc.scale(1.0 / used as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, sr: f64, n: usize) -> Vec<f64> {
        // Moderate level: log(1+X) compression biases spectral statistics
        // toward the leakage floor as the level rises.
        (0..n)
            .map(|i| 0.1 * (2.0 * std::f64::consts::PI * freq * i as f64 / sr).sin())
            .collect()
    }

    fn noise(n: usize, mut state: u64) -> Vec<f64> {
        (0..n)
            .map(|_| {
                // xorshift64, plenty for a test signal
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state as f64 / u64::MAX as f64) * 0.2 - 0.1
            })
            .collect()
    }

    fn frames_of(signal: &[f64], sr: f64) -> (Vec<Vec<f64>>, usize) {
        let cfg = super::super::FrameConfig::default();
        let frame_len = cfg.frame_len(sr);
        let hop = cfg.hop(sr);
        let fft_size = cfg.fft_size(sr);
        let w = window(WindowKind::FlatTop, frame_len);
        let n_frames = (signal.len() - frame_len) / hop + 1;
        (
            magnitude_frames(signal, frame_len, hop, fft_size, &w, n_frames, true),
            fft_size,
        )
    }

    #[test]
    fn zero_signal_gives_zero_frames() {
        let signal = vec![0.0f64; 8000];
        let (frames, _) = frames_of(&signal, 48000.0);
        for frame in &frames {
            assert!(frame.iter().all(|&m| m == 0.0));
        }
    }

    #[test]
    fn sine_peak_lands_on_its_bin() {
        let sr = 48000.0;
        let (frames, fft_size) = frames_of(&sine(1000.0, sr, 8000), sr);
        let bin_hz = sr / fft_size as f64;
        let peak_bin = frames[0]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert!((peak_bin as f64 * bin_hz - 1000.0).abs() < 2.0 * bin_hz);
    }

    #[test]
    fn centroid_of_pure_tone() {
        let sr = 48000.0;
        let (frames, fft_size) = frames_of(&sine(1000.0, sr, 12000), sr);
        let c = mean_spectral_centroid(&frames, sr, fft_size).unwrap();
        assert!((c - 1000.0).abs() / 1000.0 < 0.02, "centroid {c}");
    }

    #[test]
    fn centroid_of_white_noise_is_quarter_rate() {
        let sr = 48000.0;
        let (frames, fft_size) = frames_of(&noise(48000, 0xfeed), sr);
        let c = mean_spectral_centroid(&frames, sr, fft_size).unwrap();
        assert!((c - sr / 4.0).abs() / (sr / 4.0) < 0.05, "centroid {c}");
    }

    #[test]
    fn centroid_of_two_equal_tones_is_their_midpoint() {
        let sr = 48000.0;
        let a = sine(500.0, sr, 12000);
        let b = sine(1500.0, sr, 12000);
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let (frames, fft_size) = frames_of(&mix, sr);
        let c = mean_spectral_centroid(&frames, sr, fft_size).unwrap();
        assert!((c - 1000.0).abs() / 1000.0 < 0.05, "centroid {c}");
    }

    #[test]
    fn all_silent_frames_error() {
        let frames = vec![vec![0.0f64; 100]; 3];
        assert!(mean_spectral_centroid(&frames, 48000.0, 4096).is_err());
        assert!(mean_spectral_flatness(&frames).is_err());
    }

    #[test]
    fn flatness_of_flat_spectrum_is_one() {
        let frames = vec![vec![0.5f64; 2049]];
        let f = mean_spectral_flatness(&frames).unwrap();
        assert!((f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flatness_of_single_bin_collapses() {
        let mut frame = vec![0.0f64; 2049];
        frame[100] = 1.0;
        let f = mean_spectral_flatness(&[frame]).unwrap();
        assert!(f < 1e-3, "flatness {f}");
    }

    #[test]
    fn flatness_separates_noise_from_tone() {
        let sr = 48000.0;
        let (noise_frames, _) = frames_of(&noise(24000, 0xbeef), sr);
        let (tone_frames, _) = frames_of(&sine(1000.0, sr, 24000), sr);
        let fn_ = mean_spectral_flatness(&noise_frames).unwrap();
        let ft = mean_spectral_flatness(&tone_frames).unwrap();
        assert!(fn_ > 0.5, "noise flatness {fn_}");
        assert!(ft < 0.1, "tone flatness {ft}");
    }
}
