//! Exit time of a standard Brownian motion from the interval (−ε, ε).
//!
//! For the unit barrier the survival function has two rapidly converging
//! representations:
//!
//! ```text
//! P(τ > t) = (4/π) Σ_{n≥0} (−1)^n/(2n+1) · exp(−(2n+1)² π² t / 8)     (large t)
//! P(τ ≤ t) = 4 Σ_{n≥0} (−1)^n · Φ̄((2n+1)/√t)                          (small t)
//! ```
//!
//! The first is spliced with the second below `SPLICE_TIME`. Draws are taken
//! by inverting a tabulated distribution function with linear (hence
//! monotone) interpolation, and an exact exponential tail beyond the table.
//! Barrier ε follows from Brownian scaling: τ_ε has the law of ε² τ_1.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use rand::Rng;

use crate::error::{invalid, Result};
use crate::normal::norm_sf;

const SPLICE_TIME: f64 = 0.5;
const TABLE_HORIZON: f64 = 24.0;
const TERM_TOLERANCE: f64 = 1e-17;

pub const DEFAULT_SERIES_TRUNCATION: usize = 64;
pub const DEFAULT_TABLE_RESOLUTION: usize = 1 << 14;

/// P(τ_1 > t) for the unit barrier.
pub fn unit_exit_survival(t: f64, max_terms: usize) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t < SPLICE_TIME {
        return 1.0 - small_time_cdf(t, max_terms);
    }
    let decay = PI * PI * t / 8.0;
    let mut sum = 0.0;
    for n in 0..max_terms {
        let odd = (2 * n + 1) as f64;
        let term = (-odd * odd * decay).exp() / odd;
        if n % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
        if term < TERM_TOLERANCE {
            break;
        }
    }
    (4.0 / PI * sum).clamp(0.0, 1.0)
}

/// P(τ_1 ≤ t) for the unit barrier.
pub fn unit_exit_cdf(t: f64, max_terms: usize) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t < SPLICE_TIME {
        return small_time_cdf(t, max_terms);
    }
    1.0 - unit_exit_survival(t, max_terms)
}

fn small_time_cdf(t: f64, max_terms: usize) -> f64 {
    let inv_sqrt = 1.0 / t.sqrt();
    let mut sum = 0.0;
    for n in 0..max_terms {
        let term = norm_sf((2 * n + 1) as f64 * inv_sqrt);
        if n % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
        if term < TERM_TOLERANCE {
            break;
        }
    }
    (4.0 * sum).clamp(0.0, 1.0)
}

/// Inverse-CDF sampler for Brownian exit times.
#[derive(Debug, Clone)]
pub struct ExitTimeSampler {
    series_truncation: usize,
    cdf_table_resolution: usize,
    grid_step: f64,
    cdf: Vec<f64>,
    tail_survival: f64,
}

impl ExitTimeSampler {
    pub fn new(series_truncation: usize, cdf_table_resolution: usize) -> Result<Self> {
        if series_truncation == 0 {
            return Err(invalid("series truncation must be positive"));
        }
        if cdf_table_resolution < 16 {
            return Err(invalid("inverse-CDF table needs at least 16 points"));
        }
        let grid_step = TABLE_HORIZON / (cdf_table_resolution - 1) as f64;
        let mut cdf: Vec<f64> = (0..cdf_table_resolution)
            .map(|i| unit_exit_cdf(i as f64 * grid_step, series_truncation))
            .collect();
        // Series rounding must not break monotonicity of the table.
        for i in 1..cdf.len() {
            if cdf[i] < cdf[i - 1] {
                cdf[i] = cdf[i - 1];
            }
        }
        let tail_survival = unit_exit_survival(TABLE_HORIZON, series_truncation);
        Ok(Self {
            series_truncation,
            cdf_table_resolution,
            grid_step,
            cdf,
            tail_survival,
        })
    }

    /// Process-wide sampler with the default table.
    pub fn shared() -> Arc<ExitTimeSampler> {
        static SHARED: OnceLock<Arc<ExitTimeSampler>> = OnceLock::new();
        SHARED
            .get_or_init(|| {
                Arc::new(
                    ExitTimeSampler::new(DEFAULT_SERIES_TRUNCATION, DEFAULT_TABLE_RESOLUTION)
                        .expect("default sampler parameters are valid"),
                )
            })
            .clone()
    }

    pub fn series_truncation(&self) -> usize {
        self.series_truncation
    }

    pub fn cdf_table_resolution(&self) -> usize {
        self.cdf_table_resolution
    }

    /// Distribution function of the unit-barrier exit time.
    pub fn cdf(&self, t: f64) -> f64 {
        unit_exit_cdf(t, self.series_truncation)
    }

    /// Quantile of the unit-barrier exit time for `u` in (0, 1).
    pub fn quantile(&self, u: f64) -> f64 {
        let last = self.cdf.len() - 1;
        if u > self.cdf[last] {
            let tail = (1.0 - u).max(f64::MIN_POSITIVE);
            return TABLE_HORIZON + 8.0 / (PI * PI) * (self.tail_survival / tail).ln().max(0.0);
        }
        let i = self.cdf.partition_point(|&f| f < u).max(1);
        let (lo, hi) = (self.cdf[i - 1], self.cdf[i]);
        let frac = if hi > lo { (u - lo) / (hi - lo) } else { 0.5 };
        ((i - 1) as f64 + frac) * self.grid_step
    }

    pub fn sample_unit<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(open_unit(rng))
    }

    /// A draw of inf{t : |W_t| = ε}.
    pub fn sample<R: Rng + ?Sized>(&self, epsilon: f64, rng: &mut R) -> Result<f64> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(invalid(format!("barrier must be positive, got {epsilon}")));
        }
        Ok(epsilon * epsilon * self.sample_unit(rng))
    }
}

/// Uniform draw on the open interval (0, 1).
pub(crate) fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    ((rng.random::<u64>() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// E min{τ^1, …, τ^d} for independent unit-barrier exit times, by quadrature
/// of ∫ P(τ > t)^d dt.
pub fn chi_by_quadrature(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(invalid("noise dimension must be at least 1"));
    }
    // Composite Simpson on [0, 40]; the integrand is smooth and decays like
    // exp(−dπ²t/8).
    let n = 40_000;
    let upper = 40.0;
    let h = upper / n as f64;
    let f = |t: f64| unit_exit_survival(t, DEFAULT_SERIES_TRUNCATION).powi(d as i32);
    let mut sum = f(0.0) + f(upper);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(i as f64 * h);
    }
    Ok(sum * h / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Purpose};

    #[test]
    fn series_agree_at_splice() {
        for &t in &[0.2, 0.4, 0.5, 0.7, 1.0] {
            let large = {
                let decay = PI * PI * t / 8.0;
                let s: f64 = (0..400)
                    .map(|n| {
                        let o = (2 * n + 1) as f64;
                        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                        sign * (-o * o * decay).exp() / o
                    })
                    .sum();
                1.0 - 4.0 / PI * s
            };
            let small = small_time_cdf(t, 64);
            assert!((large - small).abs() < 1e-12, "t={t}: {large} vs {small}");
        }
    }

    #[test]
    fn cdf_is_monotone_with_correct_limits() {
        let s = ExitTimeSampler::shared();
        assert_eq!(s.cdf(0.0), 0.0);
        assert!(s.cdf(30.0) > 1.0 - 1e-12);
        let mut prev = 0.0;
        for i in 1..2000 {
            let v = s.cdf(i as f64 * 0.005);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn chi_one_is_one() {
        // ∫ P(τ > t) dt = Eτ = 1 for the unit barrier.
        assert!((chi_by_quadrature(1).unwrap() - 1.0).abs() < 1e-9);
        assert!(chi_by_quadrature(0).is_err());
    }

    #[test]
    fn draws_are_positive_and_scale() {
        let s = ExitTimeSampler::shared();
        let mut rng = substream(1, Purpose::Statistics, 0);
        for _ in 0..10_000 {
            assert!(s.sample(0.125, &mut rng).unwrap() > 0.0);
        }
        assert!(s.sample(0.0, &mut rng).is_err());
        assert!(s.sample(-1.0, &mut rng).is_err());
        assert!(s.quantile(1e-300) > 0.0);
        assert!(s.quantile(1.0 - 1e-16) > TABLE_HORIZON);
    }

    #[test]
    fn quantile_inverts_cdf() {
        let s = ExitTimeSampler::shared();
        for &u in &[0.01, 0.1, 0.5, 0.9, 0.999] {
            let t = s.quantile(u);
            // Linear interpolation on the table costs a few 1e-6 in u.
            assert!((s.cdf(t) - u).abs() < 2e-5, "u={u}");
        }
    }
}
