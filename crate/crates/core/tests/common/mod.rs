#![allow(dead_code)]

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use skeleton_control::control::{grid_points, ActionCube, ActionGrid};
use skeleton_control::model::{Coefficient, ControlledModel, PathFunctional, State, StepInput};
use skeleton_control::rng::{substream, Purpose};
use skeleton_control::skeleton::{epsilon_schedule, SkeletonParams, TimingMode};
use skeleton_control::{EulerSkeletonModel, GbmWealthModel, PayoffSpec, Result};

/// Deterministic-mode skeleton at level `k` whose horizon is exactly `n`
/// steps.
pub fn skeleton_with_steps(k: u32, d: usize, n: usize) -> SkeletonParams {
    let eps = epsilon_schedule(k).unwrap();
    let probe = SkeletonParams::new(k, d, 1.0, TimingMode::DeterministicStepCount).unwrap();
    let horizon = n as f64 * eps * eps * probe.chi_d;
    let p = SkeletonParams::new(k, d, horizon, TimingMode::DeterministicStepCount).unwrap();
    assert_eq!(p.steps(), n);
    p
}

pub fn scalar_grid(a: f64, m: usize) -> ActionGrid {
    grid_points(ActionCube::new(1, a).unwrap(), m).unwrap()
}

/// x' = x + u·g(ΔA)/ε with reward x at the end.
pub struct Toy {
    pub epsilon: f64,
    pub g: fn(f64) -> f64,
    pub ignore_action: bool,
    pub square_reward: bool,
}

impl ControlledModel for Toy {
    fn state_dim(&self) -> usize {
        1
    }

    fn initial_state(&self) -> State {
        vec![0.0]
    }

    fn evolve(&self, path: &[State], action: &[f64], input: &StepInput<'_>) -> Result<State> {
        let u = if self.ignore_action { 1.0 } else { action[0] };
        Ok(vec![path.last().unwrap()[0] + u * (self.g)(input.increment[0]) / self.epsilon])
    }

    fn payoff(&self, path: &[State]) -> f64 {
        let x = path.last().unwrap()[0];
        if self.square_reward {
            x * x
        } else {
            x
        }
    }
}

pub fn signed_toy(epsilon: f64) -> Toy {
    Toy {
        epsilon,
        g: |x| x,
        ignore_action: false,
        square_reward: false,
    }
}

/// A randomized small control problem for cross-checking DP engines.
pub struct Instance {
    pub label: String,
    pub model: Box<dyn ControlledModel>,
    pub skeleton: SkeletonParams,
    pub grid: ActionGrid,
}

pub fn random_instance(seed: u64, index: u64) -> Instance {
    let mut rng = substream(seed, Purpose::Benchmark, index);
    let n = rng.random_range(1..=3usize);
    let m = rng.random_range(2..=5usize);
    let a = rng.random_range(0.2..2.0);
    let grid = scalar_grid(a, m);
    match index % 3 {
        0 | 1 => {
            let k = rng.random_range(1..=3u32);
            let s0 = rng.random_range(40.0..60.0);
            let sigma = rng.random_range(0.1..0.5);
            let strike = rng.random_range(40.0..60.0);
            let premium = rng.random_range(0.0..3.0);
            let payoff = if index.is_multiple_of(3) {
                PayoffSpec::quadratic_hedging(premium)
            } else {
                PayoffSpec::path_dependent(premium, rng.random_range(1.0..10.0))
            };
            let mu = rng.random_range(-0.2..0.2);
            let model = GbmWealthModel::new(s0, sigma, mu, strike, payoff).unwrap();
            Instance {
                label: format!("gbm#{index} n={n} m={m} k={k} {:?}", payoff.kind),
                model: Box::new(model),
                skeleton: skeleton_with_steps(k, 1, n),
                grid,
            }
        }
        _ => {
            let kappa = rng.random_range(0.1..2.0);
            let vol = rng.random_range(0.2..1.5);
            let target = rng.random_range(-1.0..1.0);
            let drift: Coefficient = Arc::new(move |_, p, u| {
                let x = p.last().unwrap()[0];
                vec![u[0] - kappa * x]
            });
            let diffusion: Coefficient = Arc::new(move |_, p, u| {
                let x = p.last().unwrap()[0];
                vec![vol * (1.0 + 0.5 * (x * u[0]).sin())]
            });
            // Path-dependent: penalize the running maximum as well as the
            // terminal distance to the target.
            let reward: PathFunctional = Arc::new(move |p| {
                let x = p.last().unwrap()[0];
                let peak = p.iter().map(|s| s[0]).fold(f64::NEG_INFINITY, f64::max);
                -(x - target).powi(2) - 0.3 * peak.abs()
            });
            let model = EulerSkeletonModel {
                initial: vec![rng.random_range(-0.5..0.5)],
                noise_dim: 1,
                action_dim: 1,
                drift,
                diffusion,
                reward,
            };
            Instance {
                label: format!("euler#{index} n={n} m={m}"),
                model: Box::new(model),
                skeleton: skeleton_with_steps(rng.random_range(1..=2), 1, n),
                grid,
            }
        }
    }
}

/// First exit of a simulated Brownian path from (−1, 1): Euler steps of size
/// `dt` with a Brownian-bridge test for crossings between grid points.
pub fn euler_exit_time<R: Rng>(dt: f64, rng: &mut R) -> f64 {
    let sd = dt.sqrt();
    let (mut x, mut t) = (0.0f64, 0.0f64);
    loop {
        let z: f64 = rng.sample(StandardNormal);
        let y = x + sd * z;
        t += dt;
        if y.abs() >= 1.0 {
            return t;
        }
        let p_up = (-2.0 * (1.0 - x) * (1.0 - y) / dt).exp();
        let p_down = (-2.0 * (1.0 + x) * (1.0 + y) / dt).exp();
        if rng.random::<f64>() < p_up + p_down {
            return t - 0.5 * dt;
        }
        x = y;
    }
}

pub fn euler_exit_sample(n: usize, dt: f64, seed: u64) -> Vec<f64> {
    let mut rng = substream(seed, Purpose::Benchmark, 0);
    (0..n).map(|_| euler_exit_time(dt, &mut rng)).collect()
}

pub fn sup_distance_to_cdf(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let f = cdf(t);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}
