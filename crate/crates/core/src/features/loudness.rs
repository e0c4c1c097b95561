//! K-weighted loudness relative to full scale.
//!
//! The measurement applies the broadcast-loudness two-stage pre-emphasis
//! filter (a high shelf modelling head diffraction followed by a high-pass),
//! takes the mean square of the weighted signal, and maps it to decibels
//! with the standard -0.691 offset. Filter coefficients are recomputed for
//! the session sample rate from the parametric filter definitions, so any
//! rate works, not just the 48 kHz the tables are published for.

use crate::autodiff::Scalar;

/// Floor added to the mean square so digital silence measures about
/// -120.7 instead of negative infinity.
const SILENCE_EPS: f64 = 1e-12;

/// Coefficients `(b, a)` of the two K-weighting stages at `sample_rate`,
/// with `a[0]` normalized to 1.
pub fn k_weighting_coefficients(sample_rate: f64) -> ([f64; 3], [f64; 3], [f64; 3], [f64; 3]) {
    // Stage 1: high shelf.
    let gain_db = 3.999843853973347;
    let q = 0.7071752369554193;
    let center_hz = 1681.9744509555319;
    let k = (std::f64::consts::PI * center_hz / sample_rate).tan();
    let vh = 10.0f64.powf(gain_db / 20.0);
    let vb = vh.powf(0.499666774155);
    let a0 = 1.0 + k / q + k * k;
    let shelf_b = [
        (vh + vb * k / q + k * k) / a0,
        2.0 * (k * k - vh) / a0,
        (vh - vb * k / q + k * k) / a0,
    ];
    let shelf_a = [1.0, 2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0];

    // Stage 2: high pass. The numerator is left unnormalized, matching the
    // published 48 kHz tables.
    let q = 0.5003270373253953;
    let center_hz = 38.13547087613982;
    let k = (std::f64::consts::PI * center_hz / sample_rate).tan();
    let a0 = 1.0 + k / q + k * k;
    let hp_b = [1.0, -2.0, 1.0];
    let hp_a = [1.0, 2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0];

    (shelf_b, shelf_a, hp_b, hp_a)
}

struct ConstBiquad<T: Scalar> {
    b: [f64; 3],
    a: [f64; 3],
    x1: T,
    x2: T,
    y1: T,
    y2: T,
}

impl<T: Scalar> ConstBiquad<T> {
    fn new(b: [f64; 3], a: [f64; 3]) -> Self {
        let z = T::zero();
        Self {
            b,
            a,
            x1: z,
            x2: z,
            y1: z,
            y2: z,
        }
    }

    #[inline(always)]
    fn process(&mut self, x0: T) -> T {
        let y0 = x0.scale(self.b[0]) + self.x1.scale(self.b[1]) + self.x2.scale(self.b[2])
            - self.y1.scale(self.a[1])
            - self.y2.scale(self.a[2]);
        self.x2 = self.x1;
        self.x1 = x0;
        self.y2 = self.y1;
        self.y1 = y0;
        y0
    }
}

/// Loudness, K-weighted, relative to full scale, of one mono segment:
/// `-0.691 + 10*log10(mean_square(k_weighted(x)) + eps)`.
pub fn lkfs<T: Scalar>(segment: &[T], sample_rate: f64) -> T {
    let (shelf_b, shelf_a, hp_b, hp_a) = k_weighting_coefficients(sample_rate);
    let mut shelf = ConstBiquad::new(shelf_b, shelf_a);
    let mut hp = ConstBiquad::new(hp_b, hp_a);

    let mut sum_sq = T::zero();
    for &x in segment {
        let w = hp.process(shelf.process(x));
        sum_sq = sum_sq + w * w;
    }
    let mean_sq = sum_sq.scale(1.0 / segment.len().max(1) as f64);
    mean_sq
        .offset(SILENCE_EPS)
        .ln()
        .scale(10.0 / std::f64::consts::LN_10)
        .offset(-0.691)
}
