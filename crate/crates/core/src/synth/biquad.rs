//! Second-order IIR filter, generic over the number field.
//!
//! Coefficients follow the RBJ audio-cookbook formulas. The filter is
//! evaluated by direct-form-I time-domain recursion, so tangent lanes flow
//! through both the coefficients and the state.

use crate::autodiff::Scalar;

use super::SynthError;

/// Normalized biquad coefficients (`a0` divided out) plus recursion state.
#[derive(Clone, Copy, Debug)]
pub struct Biquad<T: Scalar> {
    b0: T,
    b1: T,
    b2: T,
    a1: T,
    a2: T,
    x1: T,
    x2: T,
    y1: T,
    y2: T,
}

impl<T: Scalar> Biquad<T> {
    pub fn new(b0: T, b1: T, b2: T, a1: T, a2: T) -> Self {
        let z = T::zero();
        Self {
            b0,
            b1,
            b2,
            a1,
            a2,
            x1: z,
            x2: z,
            y1: z,
            y2: z,
        }
    }

    pub fn reset(&mut self) {
        let z = T::zero();
        self.x1 = z;
        self.x2 = z;
        self.y1 = z;
        self.y2 = z;
    }

    #[inline(always)]
    pub fn process(&mut self, x0: T) -> T {
        let y0 = self.b0 * x0 + self.b1 * self.x1 + self.b2 * self.x2
            - self.a1 * self.y1
            - self.a2 * self.y2;
        self.x2 = self.x1;
        self.x1 = x0;
        self.y2 = self.y1;
        self.y1 = y0;
        y0
    }
}

/// High-pass coefficients `(b0, b1, b2, a1, a2)` for a cutoff and Q that may
/// themselves carry tangents.
pub fn highpass_coefficients<T: Scalar>(
    cutoff: T,
    q: T,
    sample_rate: f64,
) -> Result<(T, T, T, T, T), SynthError> {
    let fc = cutoff.value();
    if !(fc > 0.0 && fc < sample_rate / 2.0) {
        return Err(SynthError::InvalidCutoff {
            cutoff: fc,
            sample_rate,
        });
    }
    if q.value() <= 0.0 {
        return Err(SynthError::InvalidCutoff {
            cutoff: fc,
            sample_rate,
        });
    }

    let w0 = cutoff.scale(2.0 * std::f64::consts::PI / sample_rate);
    let cos_w0 = w0.cos();
    let alpha = w0.sin() / q.scale(2.0);

    let one = T::from_f64(1.0);
    let half_one_plus_cos = (one + cos_w0).scale(0.5);

    let a0 = one + alpha;
    let inv_a0 = a0.recip();

    let b0 = half_one_plus_cos * inv_a0;
    let b1 = -(one + cos_w0) * inv_a0;
    let b2 = b0;
    let a1 = cos_w0.scale(-2.0) * inv_a0;
    let a2 = (one - alpha) * inv_a0;
    Ok((b0, b1, b2, a1, a2))
}

/// Analytic magnitude response of the cookbook high-pass at frequency `f`.
///
/// Used by tests to check the recursion against the transfer function.
pub fn highpass_magnitude_response(cutoff: f64, q: f64, sample_rate: f64, f: f64) -> f64 {
    let (b0, b1, b2, a1, a2) =
        highpass_coefficients::<f64>(cutoff, q, sample_rate).expect("valid filter");
    let w = 2.0 * std::f64::consts::PI * f / sample_rate;
    let (cos1, sin1) = (w.cos(), w.sin());
    let (cos2, sin2) = ((2.0 * w).cos(), (2.0 * w).sin());
    let num_re = b0 + b1 * cos1 + b2 * cos2;
    let num_im = -(b1 * sin1 + b2 * sin2);
    let den_re = 1.0 + a1 * cos1 + a2 * cos2;
    let den_im = -(a1 * sin1 + a2 * sin2);
    ((num_re * num_re + num_im * num_im) / (den_re * den_re + den_im * den_im)).sqrt()
}
