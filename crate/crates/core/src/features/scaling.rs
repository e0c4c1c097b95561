//! Psychophysical scalings that make feature differences comparable.
//!
//! Loudness is already perceptual (decibel-like), so it needs no extra map.
//! Spectral centroid uses the interval scale derived by Kazazis et al. from
//! brightness-interval judgments; spectral flatness goes to decibels;
//! temporal centroid uses a power law fitted to duration perception of
//! damped sounds.

use crate::autodiff::Scalar;

/// Kazazis interval scale for spectral centroid.
/// Input in hertz (must be positive); `s(1000 Hz)` is almost exactly 10.
pub fn scale_spectral_centroid<T: Scalar>(centroid_hz: T) -> T {
    centroid_hz.powf(-0.1621).scale(-34.61).offset(21.2985)
}

/// Spectral flatness in decibels: `20*log10(x)`. Flatness is at most 1, so
/// the scaled value is at most 0.
pub fn scale_spectral_flatness<T: Scalar>(flatness: T) -> T {
    flatness.ln().scale(20.0 / std::f64::consts::LN_10)
}

/// Power-law scaling for temporal centroid: `0.03 * x^1.864` with `x` the
/// raw centroid expressed in 100 ms units.
pub fn scale_temporal_centroid<T: Scalar>(centroid_s: T) -> T {
    centroid_s.scale(10.0).powf(1.864).scale(0.03)
}
