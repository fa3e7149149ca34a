//! Standard normal distribution function.

use std::f64::consts::FRAC_1_SQRT_2;

/// Φ(x), via the complementary error function so both tails keep full
/// relative precision.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// 1 − Φ(x).
pub fn norm_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}
