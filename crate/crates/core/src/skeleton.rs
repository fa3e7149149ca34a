//! The discrete-type skeleton of a d-dimensional Brownian motion.
//!
//! Level k watches the motion until some coordinate has moved by ε_k since
//! the previous stopping time. Each step therefore carries the exiting
//! coordinate, the sign of its move and the waiting time. The d coordinates
//! are independent, so the step is sampled exactly: one unit-barrier exit
//! time and one sign per coordinate, keeping the earliest exit (lowest index
//! on ties).

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::exit_time::{chi_by_quadrature, ExitTimeSampler};
use crate::rng::{substream, Purpose};
use crate::stats::{MeanEstimate, Welford};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimingMode {
    /// Waiting times are drawn from the exit-time law.
    SampledWaitingTimes,
    /// Waiting times are replaced by their mean ε²χ_d; for d = 1 the
    /// skeleton becomes a symmetric binomial tree.
    DeterministicStepCount,
}

/// Default level schedule ε_k = 2^{−k}.
pub fn epsilon_schedule(k: u32) -> Result<f64> {
    if k == 0 {
        return Err(invalid("discretization level k must be at least 1"));
    }
    if k > 1000 {
        return Err(invalid(format!("discretization level {k} underflows")));
    }
    Ok((-(k as f64)).exp2())
}

/// e(k, t) = ⌈ε^{−2} t / χ_d⌉ for an explicit level size.
pub fn steps_for_epsilon(epsilon: f64, t: f64, chi_d: f64) -> Result<usize> {
    if !(epsilon > 0.0) {
        return Err(invalid(format!("level size must be positive, got {epsilon}")));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid(format!("time must be nonnegative, got {t}")));
    }
    if !(chi_d > 0.0) {
        return Err(invalid(format!("chi_d must be positive, got {chi_d}")));
    }
    let x = t / (epsilon * epsilon * chi_d);
    // Absorb rounding so that exact multiples do not gain a step.
    let nearest = x.round();
    let steps = if (x - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        x.ceil()
    };
    if steps > usize::MAX as f64 / 2.0 {
        return Err(invalid("step count overflows"));
    }
    Ok(steps as usize)
}

/// e(k, t) under the default schedule.
pub fn steps_horizon(k: u32, t: f64, chi_d: f64) -> Result<usize> {
    steps_for_epsilon(epsilon_schedule(k)?, t, chi_d)
}

/// χ_d = E min{τ^1, …, τ^d}; exactly 1 for d = 1.
pub fn chi_reference(d: usize) -> Result<f64> {
    match d {
        0 => Err(invalid("noise dimension must be at least 1")),
        1 => Ok(1.0),
        _ => chi_by_quadrature(d),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiEstimate {
    pub value: f64,
    pub std_error: f64,
    /// 95% confidence half-width.
    pub half_width: f64,
    pub exact: bool,
}

/// χ_d: exact for d = 1, otherwise a Monte Carlo estimate.
pub fn chi(d: usize, mc_samples: usize, seed: u64) -> Result<ChiEstimate> {
    match d {
        0 => Err(invalid("noise dimension must be at least 1")),
        1 => Ok(ChiEstimate {
            value: 1.0,
            std_error: 0.0,
            half_width: 0.0,
            exact: true,
        }),
        _ => chi_monte_carlo(d, mc_samples, seed),
    }
}

/// Monte Carlo estimate of E min{τ^1, …, τ^d}, regardless of d.
pub fn chi_monte_carlo(d: usize, mc_samples: usize, seed: u64) -> Result<ChiEstimate> {
    if d == 0 {
        return Err(invalid("noise dimension must be at least 1"));
    }
    if mc_samples < 2 {
        return Err(invalid("chi estimation needs at least two samples"));
    }
    let sampler = ExitTimeSampler::shared();
    let draws: Vec<f64> = chunk_ranges(mc_samples)
        .into_par_iter()
        .flat_map_iter(|(chunk, range)| {
            let mut rng = substream(seed, Purpose::Chi, chunk as u64);
            let sampler = sampler.clone();
            range.map(move |_| {
                (0..d)
                    .map(|_| sampler.sample_unit(&mut rng))
                    .fold(f64::INFINITY, f64::min)
            })
        })
        .collect();
    let est = MeanEstimate::from_samples(&draws);
    Ok(ChiEstimate {
        value: est.mean,
        std_error: est.std_error,
        half_width: 1.96 * est.std_error,
        exact: false,
    })
}

const CHUNK: usize = 4096;

/// Fixed-size work chunks, so that stream assignment is independent of the
/// thread count.
pub(crate) fn chunk_ranges(n: usize) -> Vec<(usize, std::ops::Range<usize>)> {
    (0..n.div_ceil(CHUNK))
        .map(|c| (c, c * CHUNK..((c + 1) * CHUNK).min(n)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkeletonParams {
    pub k: u32,
    pub epsilon: f64,
    pub d: usize,
    pub horizon: f64,
    pub timing_mode: TimingMode,
    pub chi_d: f64,
}

impl SkeletonParams {
    /// Level `k` of the default schedule, with χ_d from its reference value.
    pub fn new(k: u32, d: usize, horizon: f64, timing_mode: TimingMode) -> Result<Self> {
        let params = Self {
            k,
            epsilon: epsilon_schedule(k)?,
            d,
            horizon,
            timing_mode,
            chi_d: chi_reference(d)?,
        };
        params.validate()?;
        Ok(params)
    }

    /// Overrides ε_k; any square-summable schedule is admissible.
    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        self.epsilon = epsilon;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(invalid("discretization level k must be at least 1"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(invalid(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.d == 0 {
            return Err(invalid("noise dimension must be at least 1"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.chi_d > 0.0 && self.chi_d <= 1.0) {
            return Err(invalid(format!("chi_d must lie in (0, 1], got {}", self.chi_d)));
        }
        Ok(())
    }

    /// e(k, T).
    pub fn steps(&self) -> usize {
        steps_for_epsilon(self.epsilon, self.horizon, self.chi_d)
            .expect("validated parameters give a finite step count")
    }

    /// Mean waiting time ε²χ_d.
    pub fn mean_wait(&self) -> f64 {
        self.epsilon * self.epsilon * self.chi_d
    }
}

/// One skeleton step: coordinate `coord` moved by `sign`·ε after `wait`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub coord: u32,
    pub sign: i8,
    pub wait: f64,
}

impl Step {
    /// Index of this step among the 2d equally likely (coordinate, sign)
    /// outcomes.
    pub fn branch(&self) -> usize {
        2 * self.coord as usize + usize::from(self.sign < 0)
    }

    pub fn from_branch(branch: usize, wait: f64) -> Self {
        Self {
            coord: (branch / 2) as u32,
            sign: if branch.is_multiple_of(2) { 1 } else { -1 },
            wait,
        }
    }

    pub fn write_increment(&self, epsilon: f64, out: &mut [f64]) {
        out.fill(0.0);
        out[self.coord as usize] = self.sign as f64 * epsilon;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonPath {
    pub epsilon: f64,
    pub d: usize,
    pub timing_mode: TimingMode,
    pub steps: Vec<Step>,
    /// T^k_0 = 0, T^k_1, …; one longer than `steps`.
    pub stop_times: Vec<f64>,
}

impl SkeletonPath {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn increment(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        self.steps[n].write_increment(self.epsilon, &mut out);
        out
    }

    pub fn waiting_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.steps.iter().map(|s| s.wait)
    }

    /// A^k at each stopping time, coordinate-wise.
    pub fn noise_values(&self) -> Vec<Vec<f64>> {
        let mut acc = vec![0.0; self.d];
        let mut out = vec![acc.clone()];
        for s in &self.steps {
            acc[s.coord as usize] += s.sign as f64 * self.epsilon;
            out.push(acc.clone());
        }
        out
    }

    /// Number of steps at which a functional of the path stopped at
    /// T ∧ T^k_n is read off: all steps in deterministic mode, otherwise the
    /// last stopping time not exceeding `horizon`.
    pub fn terminal_index(&self, horizon: f64) -> usize {
        match self.timing_mode {
            TimingMode::DeterministicStepCount => self.len(),
            TimingMode::SampledWaitingTimes => {
                self.stop_times.partition_point(|&t| t <= horizon).saturating_sub(1)
            }
        }
    }
}

/// Draws one step of the skeleton.
pub fn sample_step<R: Rng + ?Sized>(
    params: &SkeletonParams,
    sampler: &ExitTimeSampler,
    rng: &mut R,
) -> Step {
    let eps2 = params.epsilon * params.epsilon;
    match params.timing_mode {
        TimingMode::DeterministicStepCount => {
            let branch = rng.random_range(0..2 * params.d);
            Step::from_branch(branch, eps2 * params.chi_d)
        }
        TimingMode::SampledWaitingTimes => {
            let mut best = Step {
                coord: 0,
                sign: 1,
                wait: f64::INFINITY,
            };
            for j in 0..params.d {
                let sign = if rng.random::<bool>() { 1 } else { -1 };
                let wait = eps2 * sampler.sample_unit(rng);
                if wait < best.wait {
                    best = Step {
                        coord: j as u32,
                        sign,
                        wait,
                    };
                }
            }
            best
        }
    }
}

pub fn sample_skeleton_path<R: Rng + ?Sized>(
    params: &SkeletonParams,
    n_steps: usize,
    sampler: &ExitTimeSampler,
    rng: &mut R,
) -> SkeletonPath {
    let mut steps = Vec::with_capacity(n_steps);
    let mut stop_times = Vec::with_capacity(n_steps + 1);
    stop_times.push(0.0);
    let mut t = 0.0;
    for _ in 0..n_steps {
        let step = sample_step(params, sampler, rng);
        t += step.wait;
        stop_times.push(t);
        steps.push(step);
    }
    SkeletonPath {
        epsilon: params.epsilon,
        d: params.d,
        timing_mode: params.timing_mode,
        steps,
        stop_times,
    }
}

/// Path `path_id` of an experiment, drawn from its own substream.
pub fn sample_indexed_path(
    params: &SkeletonParams,
    n_steps: usize,
    seed: u64,
    path_id: u64,
) -> SkeletonPath {
    let mut rng = substream(seed, Purpose::Skeleton, path_id);
    sample_skeleton_path(params, n_steps, &ExitTimeSampler::shared(), &mut rng)
}

/// Monte Carlo estimate of E|T^k_{e(k,t)} − t| (uniform convergence of the
/// skeleton clock).
pub fn clock_deviation(params: &SkeletonParams, t: f64, n_paths: usize, seed: u64) -> Result<MeanEstimate> {
    let mut sampled = *params;
    sampled.timing_mode = TimingMode::SampledWaitingTimes;
    let n = steps_for_epsilon(params.epsilon, t, params.chi_d)?;
    let sampler = ExitTimeSampler::shared();
    let devs: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|id| {
            let mut rng = substream(seed, Purpose::Statistics, id);
            let total: f64 = (0..n)
                .map(|_| sample_step(&sampled, &sampler, &mut rng).wait)
                .sum();
            (total - t).abs()
        })
        .collect();
    let mut acc = Welford::default();
    devs.iter().for_each(|&x| acc.push(x));
    Ok(acc.estimate())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_schedule_values() {
        assert_eq!(epsilon_schedule(1).unwrap(), 0.5);
        assert_eq!(epsilon_schedule(3).unwrap(), 0.125);
        assert_eq!(epsilon_schedule(10).unwrap(), 0.0009765625);
        assert!(epsilon_schedule(0).is_err());
    }

    #[test]
    fn steps_horizon_values() {
        assert_eq!(steps_horizon(3, 1.0, 1.0).unwrap(), 64);
        assert_eq!(steps_horizon(1, 1.0, 1.0).unwrap(), 4);
        assert_eq!(steps_horizon(3, 0.0, 1.0).unwrap(), 0);
        assert_eq!(steps_horizon(1, 0.3, 1.0).unwrap(), 2);
        assert!(steps_horizon(3, -1.0, 1.0).is_err());
        assert!(steps_horizon(3, 1.0, 0.0).is_err());
    }

    #[test]
    fn chi_exact_for_one_dimension() {
        let c = chi(1, 10, 0).unwrap();
        assert_eq!(c.value, 1.0);
        assert!(c.exact);
        assert!(chi(0, 10, 0).is_err());
    }

    #[test]
    fn empty_path() {
        let p = SkeletonParams::new(3, 1, 1.0, TimingMode::SampledWaitingTimes).unwrap();
        let path = sample_indexed_path(&p, 0, 1, 0);
        assert!(path.is_empty());
        assert_eq!(path.stop_times, vec![0.0]);
        assert_eq!(path.terminal_index(1.0), 0);
    }

    #[test]
    fn path_invariants() {
        for mode in [TimingMode::SampledWaitingTimes, TimingMode::DeterministicStepCount] {
            for d in [1, 3] {
                let p = SkeletonParams::new(2, d, 1.0, mode).unwrap();
                let path = sample_indexed_path(&p, p.steps(), 11, 5);
                assert_eq!(path.len(), p.steps());
                for (n, s) in path.steps.iter().enumerate() {
                    assert!(path.stop_times[n + 1] > path.stop_times[n]);
                    assert!((path.stop_times[n + 1] - path.stop_times[n] - s.wait).abs() < 1e-15);
                    assert!((s.coord as usize) < d);
                    assert!(s.sign == 1 || s.sign == -1);
                    let inc = path.increment(n);
                    assert_eq!(inc.iter().filter(|x| **x != 0.0).count(), 1);
                    if mode == TimingMode::DeterministicStepCount {
                        assert_eq!(s.wait, p.mean_wait());
                    }
                }
            }
        }
    }

    #[test]
    fn terminal_index_rules() {
        let p = SkeletonParams::new(2, 1, 1.0, TimingMode::SampledWaitingTimes).unwrap();
        let mut path = sample_indexed_path(&p, 4, 1, 0);
        path.stop_times = vec![0.0, 0.3, 0.6, 0.9, 1.2];
        assert_eq!(path.terminal_index(1.0), 3);
        path.stop_times = vec![0.0, 0.1, 0.2, 0.3, 0.4];
        assert_eq!(path.terminal_index(1.0), 4);
        path.timing_mode = TimingMode::DeterministicStepCount;
        path.stop_times = vec![0.0, 0.3, 0.6, 0.9, 1.2];
        assert_eq!(path.terminal_index(1.0), 4);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(SkeletonParams::new(0, 1, 1.0, TimingMode::SampledWaitingTimes).is_err());
        assert!(SkeletonParams::new(1, 0, 1.0, TimingMode::SampledWaitingTimes).is_err());
        assert!(SkeletonParams::new(1, 1, 0.0, TimingMode::SampledWaitingTimes).is_err());
        let p = SkeletonParams::new(1, 1, 1.0, TimingMode::SampledWaitingTimes).unwrap();
        assert!(p.with_epsilon(-0.1).is_err());
    }
}
