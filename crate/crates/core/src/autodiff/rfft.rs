//! Real-input FFT over plain and dual-valued signals.
//!
//! Dual signals are transformed lane by lane: the value lane and each
//! nonzero tangent lane get their own real FFT. Linearity of the DFT makes
//! this exact.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::Dual;

thread_local! {
    static PLANS: RefCell<HashMap<usize, Arc<dyn Fft<f64>>>> = RefCell::new(HashMap::new());
}

fn plan(size: usize) -> Arc<dyn Fft<f64>> {
    PLANS.with(|plans| {
        plans
            .borrow_mut()
            .entry(size)
            .or_insert_with(|| FftPlanner::new().plan_fft_forward(size))
            .clone()
    })
}

fn check_size(len: usize, fft_size: usize) {
    assert!(
        fft_size.is_power_of_two(),
        "fft size {fft_size} is not a power of two"
    );
    assert!(
        fft_size >= len,
        "fft size {fft_size} shorter than signal length {len}"
    );
}

fn transform(signal: &[f64], fft_size: usize) -> Vec<Complex<f64>> {
    let mut buf = vec![Complex::new(0.0, 0.0); fft_size];
    for (slot, &x) in buf.iter_mut().zip(signal.iter()) {
        slot.re = x;
    }
    plan(fft_size).process(&mut buf);
    buf.truncate(fft_size / 2 + 1);
    buf
}

/// FFT of a real signal zero-padded to `fft_size`; bins `0..=fft_size/2`
/// as `(re, im)` pairs.
pub fn rfft_f64(signal: &[f64], fft_size: usize) -> Vec<(f64, f64)> {
    check_size(signal.len(), fft_size);
    transform(signal, fft_size)
        .into_iter()
        .map(|c| (c.re, c.im))
        .collect()
}

pub(super) fn rfft_dual<const W: usize>(
    signal: &[Dual<W>],
    fft_size: usize,
) -> Vec<(Dual<W>, Dual<W>)> {
    check_size(signal.len(), fft_size);
    let bins = fft_size / 2 + 1;

    let values: Vec<f64> = signal.iter().map(|d| d.value).collect();
    let value_spectrum = transform(&values, fft_size);

    let mut out: Vec<(Dual<W>, Dual<W>)> = value_spectrum
        .iter()
        .map(|c| (Dual::constant(c.re), Dual::constant(c.im)))
        .collect();

    let mut lane = vec![0.0f64; signal.len()];
    for k in 0..W {
        let mut nonzero = false;
        for (slot, d) in lane.iter_mut().zip(signal.iter()) {
            *slot = d.tangent[k];
            nonzero |= *slot != 0.0;
        }
        // An identically-zero lane transforms to zero.
        if !nonzero {
            continue;
        }
        let lane_spectrum = transform(&lane, fft_size);
        for (bin, c) in out.iter_mut().zip(lane_spectrum.iter()).take(bins) {
            bin.0.tangent[k] = c.re;
            bin.1.tangent[k] = c.im;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Scalar;

    #[test]
    fn zero_signal_gives_zero_spectrum() {
        let signal = vec![Dual::<2>::constant(0.0); 16];
        let spec = Dual::rfft(&signal, 16);
        assert_eq!(spec.len(), 9);
        for (re, im) in spec {
            assert_eq!(re.value, 0.0);
            assert_eq!(im.value, 0.0);
            assert_eq!(re.tangent, [0.0; 2]);
            assert_eq!(im.tangent, [0.0; 2]);
        }
    }

    #[test]
    fn impulse_gives_flat_spectrum_in_value_and_tangent() {
        let mut signal = vec![Dual::<1>::constant(0.0); 16];
        signal[0] = Dual::seeded(1.0, 0);
        let spec = Dual::rfft(&signal, 16);
        for (re, im) in spec {
            assert!((re.value - 1.0).abs() < 1e-12);
            assert!(im.value.abs() < 1e-12);
            assert!((re.tangent[0] - 1.0).abs() < 1e-12);
            assert!(im.tangent[0].abs() < 1e-12);
        }
    }

    #[test]
    fn linearity_holds_to_machine_precision() {
        let n = 64;
        let xs: Vec<Dual<2>> = (0..n)
            .map(|i| {
                let mut d = Dual::constant(((i * 7) % 13) as f64 / 13.0 - 0.5);
                d.tangent = [0.3 * i as f64, -0.1];
                d
            })
            .collect();
        let ys: Vec<Dual<2>> = (0..n)
            .map(|i| {
                let mut d = Dual::constant(((i * 5) % 11) as f64 / 11.0 - 0.5);
                d.tangent = [0.05, 0.7 * (i % 3) as f64];
                d
            })
            .collect();
        let (a, b) = (1.7, -0.4);
        let combined: Vec<Dual<2>> = xs
            .iter()
            .zip(ys.iter())
            .map(|(&x, &y)| x.scale(a) + y.scale(b))
            .collect();

        let fx = Dual::rfft(&xs, 64);
        let fy = Dual::rfft(&ys, 64);
        let fc = Dual::rfft(&combined, 64);

        for i in 0..fc.len() {
            let want_re = fx[i].0.scale(a) + fy[i].0.scale(b);
            let want_im = fx[i].1.scale(a) + fy[i].1.scale(b);
            assert!((fc[i].0.value - want_re.value).abs() < 1e-9);
            assert!((fc[i].1.value - want_im.value).abs() < 1e-9);
            for k in 0..2 {
                assert!((fc[i].0.tangent[k] - want_re.tangent[k]).abs() < 1e-9);
                assert!((fc[i].1.tangent[k] - want_im.tangent[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn magnitude_tangent_matches_finite_differences() {
        // d|X[k]|/dg for signal g*w where w is a fixed random-ish waveform.
        let n = 64;
        let wave: Vec<f64> = (0..n)
            .map(|i| ((i * 37) % 101) as f64 / 101.0 - 0.5)
            .collect();
        let gain = 0.8;

        let duals: Vec<Dual<1>> = wave
            .iter()
            .map(|&w| Dual::seeded(gain, 0).scale(w))
            .collect();
        let spec = Dual::rfft(&duals, 64);

        let mags = |g: f64| -> Vec<f64> {
            let scaled: Vec<f64> = wave.iter().map(|&w| g * w).collect();
            rfft_f64(&scaled, 64)
                .iter()
                .map(|&(re, im)| (re * re + im * im).sqrt())
                .collect()
        };
        let h = 1e-6;
        let hi = mags(gain + h);
        let lo = mags(gain - h);

        for (k, &(re, im)) in spec.iter().enumerate() {
            let mag2 = re * re + im * im;
            if mag2.value <= 1e-12 {
                continue;
            }
            let mag = mag2.sqrt();
            let numeric = (hi[k] - lo[k]) / (2.0 * h);
            let rel = (mag.tangent[0] - numeric).abs() / numeric.abs().max(1e-9);
            assert!(rel < 1e-4, "bin {k}: {} vs {}", mag.tangent[0], numeric);
        }
    }

    #[test]
    #[should_panic(expected = "power of two")]
    fn non_power_of_two_size_panics() {
        let _ = rfft_f64(&[0.0; 10], 12);
    }
}
