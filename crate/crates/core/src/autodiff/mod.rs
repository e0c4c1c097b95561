//! Forward-mode automatic differentiation with fixed-width tangent vectors.
//!
//! [`Dual<W>`] carries a value and `W` partial derivatives. Synthesis and
//! feature-extraction code is written once against the [`Scalar`] trait and
//! instantiated either with plain `f64` (fast, value-only) or with `Dual`
//! (value plus a full gradient in a single pass). With `W` equal to the
//! number of synthesizer parameters, one dual-valued render yields the
//! complete Jacobian of every downstream feature.

mod rfft;

pub use rfft::rfft_f64;

use std::ops::{Add, Div, Mul, Neg, Sub};

/// The number field over which signals and parameters are expressed.
///
/// Implemented by `f64` (values only) and [`Dual`] (values plus tangents).
/// Domain violations (division by a zero value, `ln`/`sqrt` of a
/// non-positive value) panic immediately with a descriptive message instead
/// of silently producing NaN; callers are expected to guard degenerate
/// inputs at a higher level where they can be reported as data errors.
pub trait Scalar:
    Copy
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(x: f64) -> Self;

    /// The value part, discarding any derivative information.
    fn value(self) -> f64;

    fn exp(self) -> Self;
    fn ln(self) -> Self;
    /// `ln(1 + x)`, accurate near zero.
    fn ln_1p(self) -> Self;
    fn sqrt(self) -> Self;
    /// Power with a constant exponent.
    fn powf(self, exponent: f64) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tanh(self) -> Self;
    /// Absolute value; the tangent at exactly zero is defined as zero.
    fn abs(self) -> Self;
    fn recip(self) -> Self;

    /// Maximum with a constant. The tangent follows the selected branch;
    /// at a tie the variable branch wins.
    fn max_const(self, c: f64) -> Self;
    /// Minimum with a constant, same tie rule as [`Scalar::max_const`].
    fn min_const(self, c: f64) -> Self;

    /// Multiply by a constant (cheaper than a full `Mul` for duals).
    fn scale(self, c: f64) -> Self;
    /// Add a constant.
    fn offset(self, c: f64) -> Self;

    /// Real-input FFT of `signal`, zero-padded to `fft_size`.
    ///
    /// Returns `(re, im)` pairs for bins `0..=fft_size/2`. The FFT is linear,
    /// so tangent lanes transform exactly like the value lane. `fft_size`
    /// must be a power of two and at least `signal.len()`.
    fn rfft(signal: &[Self], fft_size: usize) -> Vec<(Self, Self)>;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn clamp01(self) -> Self {
        self.max_const(0.0).min_const(1.0)
    }
}

impl Scalar for f64 {
    #[inline(always)]
    fn from_f64(x: f64) -> Self {
        x
    }

    #[inline(always)]
    fn value(self) -> f64 {
        self
    }

    #[inline(always)]
    fn exp(self) -> Self {
        f64::exp(self)
    }

    #[inline(always)]
    fn ln(self) -> Self {
        assert!(self > 0.0, "ln of non-positive value {self}");
        f64::ln(self)
    }

    #[inline(always)]
    fn ln_1p(self) -> Self {
        assert!(self > -1.0, "ln_1p of value {self} <= -1");
        f64::ln_1p(self)
    }

    #[inline(always)]
    fn sqrt(self) -> Self {
        assert!(self > 0.0, "sqrt of non-positive value {self}");
        f64::sqrt(self)
    }

    #[inline(always)]
    fn powf(self, exponent: f64) -> Self {
        check_pow_domain(self, exponent);
        f64::powf(self, exponent)
    }

    #[inline(always)]
    fn sin(self) -> Self {
        f64::sin(self)
    }

    #[inline(always)]
    fn cos(self) -> Self {
        f64::cos(self)
    }

    #[inline(always)]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }

    #[inline(always)]
    fn abs(self) -> Self {
        f64::abs(self)
    }

    #[inline(always)]
    fn recip(self) -> Self {
        assert!(self != 0.0, "reciprocal of zero");
        1.0 / self
    }

    #[inline(always)]
    fn max_const(self, c: f64) -> Self {
        if self >= c {
            self
        } else {
            c
        }
    }

    #[inline(always)]
    fn min_const(self, c: f64) -> Self {
        if self <= c {
            self
        } else {
            c
        }
    }

    #[inline(always)]
    fn scale(self, c: f64) -> Self {
        self * c
    }

    #[inline(always)]
    fn offset(self, c: f64) -> Self {
        self + c
    }

    fn rfft(signal: &[Self], fft_size: usize) -> Vec<(Self, Self)> {
        rfft::rfft_f64(signal, fft_size)
    }
}

#[inline(always)]
fn check_pow_domain(base: f64, exponent: f64) {
    assert!(
        base >= 0.0,
        "powf of negative base {base} (exponent {exponent})"
    );
    if base == 0.0 {
        assert!(
            exponent >= 1.0,
            "powf of zero base with exponent {exponent} < 1"
        );
    }
}

/// A number carrying a value and `W` partial derivatives.
///
/// All duals combined in one expression must share the same width; the
/// compiler enforces this through the const parameter. Lifting a constant
/// yields an all-zero tangent, so expressions built purely from constants
/// have zero derivative everywhere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<const W: usize> {
    pub value: f64,
    pub tangent: [f64; W],
}

impl<const W: usize> Dual<W> {
    /// Lift a constant: tangent is all zeros.
    #[inline(always)]
    pub fn constant(value: f64) -> Self {
        Self {
            value,
            tangent: [0.0; W],
        }
    }

    /// Lift a variable: unit tangent at `seed_index`.
    ///
    /// Panics if `seed_index >= W`.
    #[inline(always)]
    pub fn seeded(value: f64, seed_index: usize) -> Self {
        assert!(
            seed_index < W,
            "seed index {seed_index} out of range for width {W}"
        );
        let mut tangent = [0.0; W];
        tangent[seed_index] = 1.0;
        Self { value, tangent }
    }

    /// Map the value and each tangent coordinate through the chain rule:
    /// returns `(f(v), f'(v) * tangent)`.
    #[inline(always)]
    fn chain(self, value: f64, derivative: f64) -> Self {
        let mut tangent = self.tangent;
        for t in tangent.iter_mut() {
            *t *= derivative;
        }
        Self { value, tangent }
    }
}

impl<const W: usize> Add for Dual<W> {
    type Output = Self;

    #[inline(always)]
    fn add(self, rhs: Self) -> Self {
        let mut tangent = self.tangent;
        for (t, r) in tangent.iter_mut().zip(rhs.tangent.iter()) {
            *t += r;
        }
        Self {
            value: self.value + rhs.value,
            tangent,
        }
    }
}

impl<const W: usize> Sub for Dual<W> {
    type Output = Self;

    #[inline(always)]
    fn sub(self, rhs: Self) -> Self {
        let mut tangent = self.tangent;
        for (t, r) in tangent.iter_mut().zip(rhs.tangent.iter()) {
            *t -= r;
        }
        Self {
            value: self.value - rhs.value,
            tangent,
        }
    }
}

impl<const W: usize> Mul for Dual<W> {
    type Output = Self;

    #[inline(always)]
    fn mul(self, rhs: Self) -> Self {
        let mut tangent = [0.0; W];
        for i in 0..W {
            tangent[i] = self.tangent[i] * rhs.value + self.value * rhs.tangent[i];
        }
        Self {
            value: self.value * rhs.value,
            tangent,
        }
    }
}

impl<const W: usize> Div for Dual<W> {
    type Output = Self;

    #[inline(always)]
    fn div(self, rhs: Self) -> Self {
        assert!(rhs.value != 0.0, "dual division by zero value");
        let inv = 1.0 / rhs.value;
        let inv2 = inv * inv;
        let mut tangent = [0.0; W];
        for i in 0..W {
            tangent[i] = (self.tangent[i] * rhs.value - self.value * rhs.tangent[i]) * inv2;
        }
        Self {
            value: self.value * inv,
            tangent,
        }
    }
}

impl<const W: usize> Neg for Dual<W> {
    type Output = Self;

    #[inline(always)]
    fn neg(self) -> Self {
        let mut tangent = self.tangent;
        for t in tangent.iter_mut() {
            *t = -*t;
        }
        Self {
            value: -self.value,
            tangent,
        }
    }
}

impl<const W: usize> Scalar for Dual<W> {
    #[inline(always)]
    fn from_f64(x: f64) -> Self {
        Self::constant(x)
    }

    #[inline(always)]
    fn value(self) -> f64 {
        self.value
    }

    #[inline(always)]
    fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e)
    }

    #[inline(always)]
    fn ln(self) -> Self {
        assert!(self.value > 0.0, "ln of non-positive value {}", self.value);
        self.chain(self.value.ln(), 1.0 / self.value)
    }

    #[inline(always)]
    fn ln_1p(self) -> Self {
        assert!(self.value > -1.0, "ln_1p of value {} <= -1", self.value);
        self.chain(self.value.ln_1p(), 1.0 / (1.0 + self.value))
    }

    #[inline(always)]
    fn sqrt(self) -> Self {
        assert!(
            self.value > 0.0,
            "sqrt of non-positive value {}",
            self.value
        );
        let s = self.value.sqrt();
        self.chain(s, 0.5 / s)
    }

    #[inline(always)]
    fn powf(self, exponent: f64) -> Self {
        check_pow_domain(self.value, exponent);
        if self.value == 0.0 {
            // exponent >= 1 here; derivative is 0 for exponent > 1 and 1 at
            // exponent == 1.
            let d = if exponent == 1.0 { 1.0 } else { 0.0 };
            return self.chain(0.0, d);
        }
        let p = self.value.powf(exponent);
        self.chain(p, exponent * p / self.value)
    }

    #[inline(always)]
    fn sin(self) -> Self {
        self.chain(self.value.sin(), self.value.cos())
    }

    #[inline(always)]
    fn cos(self) -> Self {
        self.chain(self.value.cos(), -self.value.sin())
    }

    #[inline(always)]
    fn tanh(self) -> Self {
        let t = self.value.tanh();
        self.chain(t, 1.0 - t * t)
    }

    #[inline(always)]
    fn abs(self) -> Self {
        if self.value > 0.0 {
            self
        } else if self.value < 0.0 {
            -self
        } else {
            Self::constant(0.0)
        }
    }

    #[inline(always)]
    fn recip(self) -> Self {
        assert!(self.value != 0.0, "reciprocal of zero dual value");
        let inv = 1.0 / self.value;
        self.chain(inv, -inv * inv)
    }

    #[inline(always)]
    fn max_const(self, c: f64) -> Self {
        if self.value >= c {
            self
        } else {
            Self::constant(c)
        }
    }

    #[inline(always)]
    fn min_const(self, c: f64) -> Self {
        if self.value <= c {
            self
        } else {
            Self::constant(c)
        }
    }

    #[inline(always)]
    fn scale(self, c: f64) -> Self {
        let mut tangent = self.tangent;
        for t in tangent.iter_mut() {
            *t *= c;
        }
        Self {
            value: self.value * c,
            tangent,
        }
    }

    #[inline(always)]
    fn offset(self, c: f64) -> Self {
        Self {
            value: self.value + c,
            tangent: self.tangent,
        }
    }

    fn rfft(signal: &[Self], fft_size: usize) -> Vec<(Self, Self)> {
        rfft::rfft_dual(signal, fft_size)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
    }

    #[test]
    fn constant_lift_has_zero_tangent() {
        let c = Dual::<4>::constant(3.0);
        assert_eq!(c.value, 3.0);
        assert_eq!(c.tangent, [0.0; 4]);
    }

    #[test]
    fn seeded_lift_is_unit_vector() {
        let x = Dual::<4>::seeded(0.5, 2);
        assert_eq!(x.value, 0.5);
        assert_eq!(x.tangent, [0.0, 0.0, 1.0, 0.0]);
        let y = Dual::<1>::seeded(1.0, 0);
        assert_eq!(y.tangent, [1.0]);
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn seed_index_out_of_range_panics() {
        let _ = Dual::<2>::seeded(1.0, 2);
    }

    #[test]
    fn tanh_at_zero_has_unit_derivative() {
        let y = Dual::<1>::seeded(0.0, 0).tanh();
        assert_eq!(y.value, 0.0);
        assert_eq!(y.tangent[0], 1.0);
    }

    #[test]
    fn square_derivative() {
        let x = Dual::<1>::seeded(3.0, 0);
        let y = x * x;
        assert_eq!(y.value, 9.0);
        assert_eq!(y.tangent[0], 6.0);
    }

    #[test]
    fn exp_matches_finite_difference() {
        let y = Dual::<1>::seeded(1.0, 0).exp();
        assert!((y.value - std::f64::consts::E).abs() < 1e-15);
        let numeric = fd(|x| x.exp(), 1.0, 1e-6);
        assert!(rel_err(y.tangent[0], numeric) < 1e-8);
    }

    #[test]
    fn primitives_match_finite_differences() {
        // One representative point per primitive, away from domain edges.
        let cases: Vec<(fn(Dual<1>) -> Dual<1>, fn(f64) -> f64, f64)> = vec![
            (|x| x.ln(), |x| x.ln(), 0.7),
            (|x| x.ln_1p(), |x| x.ln_1p(), 0.3),
            (|x| x.sqrt(), |x| x.sqrt(), 2.3),
            (|x| x.powf(1.864), |x| x.powf(1.864), 1.4),
            (|x| x.powf(-0.1621), |x| x.powf(-0.1621), 900.0),
            (|x| x.sin(), |x| x.sin(), 1.1),
            (|x| x.cos(), |x| x.cos(), 1.1),
            (|x| x.tanh(), |x| x.tanh(), 0.4),
            (|x| x.abs(), |x| x.abs(), -0.8),
            (|x| x.recip(), |x| 1.0 / x, 1.7),
            (|x| x.max_const(0.5), |x| x.max(0.5), 0.9),
            (|x| x.min_const(0.5), |x| x.min(0.5), 0.1),
        ];
        for (dual_f, real_f, at) in cases {
            let out = dual_f(Dual::<1>::seeded(at, 0));
            let numeric = fd(real_f, at, 1e-6);
            assert!(
                rel_err(out.tangent[0], numeric) < 1e-6,
                "tangent {} vs fd {} at {}",
                out.tangent[0],
                numeric,
                at
            );
        }
    }

    #[test]
    fn division_quotient_rule() {
        let x = Dual::<2>::seeded(3.0, 0);
        let y = Dual::<2>::seeded(2.0, 1);
        let q = x / y;
        assert!((q.value - 1.5).abs() < 1e-15);
        assert!((q.tangent[0] - 0.5).abs() < 1e-15);
        assert!((q.tangent[1] - (-0.75)).abs() < 1e-15);
    }

    #[test]
    #[should_panic(expected = "division by zero")]
    fn division_by_zero_value_panics() {
        let _ = Dual::<1>::seeded(1.0, 0) / Dual::<1>::constant(0.0);
    }

    #[test]
    #[should_panic(expected = "non-positive")]
    fn log_of_negative_panics() {
        let _ = Dual::<1>::constant(-1.0).ln();
    }

    #[test]
    fn abs_at_zero_uses_zero_subgradient() {
        let y = Dual::<1>::seeded(0.0, 0).abs();
        assert_eq!(y.tangent[0], 0.0);
    }

    #[test]
    fn max_const_tie_passes_variable_branch() {
        let y = Dual::<1>::seeded(0.5, 0).max_const(0.5);
        assert_eq!(y.tangent[0], 1.0);
        let z = Dual::<1>::seeded(0.5, 0).min_const(0.5);
        assert_eq!(z.tangent[0], 1.0);
    }

    #[test]
    fn constants_are_absorbing() {
        let a = Dual::<3>::constant(2.0);
        let b = Dual::<3>::constant(-0.7);
        let out = ((a * b).exp() + a.sqrt()).tanh().scale(4.0).offset(1.0);
        assert_eq!(out.tangent, [0.0; 3]);
    }
}
