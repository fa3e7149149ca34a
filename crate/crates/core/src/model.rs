//! Controlled dynamics driven by the skeleton.
//!
//! A [`ControlledModel`] advances its state one skeleton step at a time. The
//! transition into step n+1 sees the stored state path up to step n, the
//! action chosen for that step, and the step's noise increment and waiting
//! time; it never sees later actions. The reward ξ is read off the state
//! path stopped at T ∧ T^k_{e(k,T)}.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::skeleton::{SkeletonParams, SkeletonPath, Step};

pub type State = Vec<f64>;

/// Data of one skeleton step as seen by a transition.
#[derive(Debug, Clone, Copy)]
pub struct StepInput<'a> {
    /// Index n of the step being taken (from T^k_n to T^k_{n+1}).
    pub step: usize,
    /// T^k_n.
    pub time: f64,
    pub increment: &'a [f64],
    pub wait: f64,
}

pub trait ControlledModel: Send + Sync {
    fn state_dim(&self) -> usize;

    fn noise_dim(&self) -> usize {
        1
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn initial_state(&self) -> State;

    /// State at T^k_{n+1} from the path up to T^k_n and the action u_n.
    fn evolve(&self, path: &[State], action: &[f64], input: &StepInput<'_>) -> Result<State>;

    /// Reward ξ on the stopped path.
    fn payoff(&self, path: &[State]) -> f64;

    /// Regression covariates at decision `step` of `horizon`.
    fn features(&self, step: usize, horizon: usize, state: &[f64]) -> Vec<f64> {
        let mut f = state.to_vec();
        f.push(step as f64 / horizon.max(1) as f64);
        f
    }

    /// Rejects skeleton levels on which the dynamics are not well defined.
    fn check_skeleton(&self, _params: &SkeletonParams) -> Result<()> {
        Ok(())
    }
}

/// What a policy may look at before step `step`.
#[derive(Debug, Clone, Copy)]
pub struct Decision<'a> {
    pub step: usize,
    pub horizon: usize,
    /// The first `step` skeleton steps.
    pub history: &'a [Step],
    /// States at T^k_0, …, T^k_step.
    pub states: &'a [State],
}

pub trait Policy: Send + Sync {
    fn decide(&self, decision: &Decision<'_>) -> Vec<f64>;
}

impl Policy for crate::control::StepControl {
    fn decide(&self, d: &Decision<'_>) -> Vec<f64> {
        self.action(d.step, d.history)
            .expect("step control must cover the whole horizon")
    }
}

impl<P: Policy + ?Sized> Policy for &P {
    fn decide(&self, d: &Decision<'_>) -> Vec<f64> {
        (**self).decide(d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub actions: Vec<Vec<f64>>,
    /// Index of the state the reward is read from.
    pub terminal: usize,
    pub payoff: f64,
}

/// Runs `policy` along one skeleton path.
pub fn simulate<M, P>(model: &M, path: &SkeletonPath, horizon_time: f64, policy: &P) -> Result<Trajectory>
where
    M: ControlledModel + ?Sized,
    P: Policy + ?Sized,
{
    let n = path.len();
    let mut states = Vec::with_capacity(n + 1);
    let mut actions = Vec::with_capacity(n);
    states.push(model.initial_state());
    let mut increment = vec![0.0; path.d];
    for (j, step) in path.steps.iter().enumerate() {
        let action = policy.decide(&Decision {
            step: j,
            horizon: n,
            history: &path.steps[..j],
            states: &states,
        });
        step.write_increment(path.epsilon, &mut increment);
        let next = model.evolve(
            &states,
            &action,
            &StepInput {
                step: j,
                time: path.stop_times[j],
                increment: &increment,
                wait: step.wait,
            },
        )?;
        states.push(next);
        actions.push(action);
    }
    let terminal = path.terminal_index(horizon_time);
    let payoff = model.payoff(&states[..=terminal]);
    Ok(Trajectory {
        states,
        actions,
        terminal,
        payoff,
    })
}

/// ϱ_c(x, y, K) = (c + x − (y − K)⁺)².
pub fn quadratic_hedging_payoff(x: f64, y: f64, strike: f64, premium: f64) -> f64 {
    let residual = premium + x - (y - strike).max(0.0);
    residual * residual
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PayoffKind {
    /// −ϱ_c(X_T, S_T, K).
    QuadraticHedging { premium: f64 },
    /// −(c + X_T − min((M_T − K)⁺, cap))², hedging a capped lookback on the
    /// running maximum M of the price.
    PathDependent { premium: f64, cap: f64 },
    Constant { value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffSpec {
    pub kind: PayoffKind,
    /// Hölder exponent of the reward; recorded, not used numerically.
    pub holder_gamma: f64,
}

impl PayoffSpec {
    pub fn quadratic_hedging(premium: f64) -> Self {
        Self {
            kind: PayoffKind::QuadraticHedging { premium },
            holder_gamma: 1.0,
        }
    }

    pub fn constant(value: f64) -> Self {
        Self {
            kind: PayoffKind::Constant { value },
            holder_gamma: 1.0,
        }
    }

    pub fn path_dependent(premium: f64, cap: f64) -> Self {
        Self {
            kind: PayoffKind::PathDependent { premium, cap },
            holder_gamma: 1.0,
        }
    }

    /// Reward from terminal price, wealth and running maximum.
    pub fn evaluate(&self, price: f64, wealth: f64, running_max: f64, strike: f64) -> f64 {
        match self.kind {
            PayoffKind::QuadraticHedging { premium } => {
                -quadratic_hedging_payoff(wealth, price, strike, premium)
            }
            PayoffKind::PathDependent { premium, cap } => {
                let claim = (running_max - strike).max(0.0).min(cap);
                let r = premium + wealth - claim;
                -r * r
            }
            PayoffKind::Constant { value } => value,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.holder_gamma > 0.0 && self.holder_gamma <= 1.0) {
            return Err(invalid("Hölder exponent must lie in (0, 1]"));
        }
        match self.kind {
            PayoffKind::PathDependent { cap, .. } if !(cap > 0.0) => {
                Err(invalid("path-dependent cap must be positive"))
            }
            _ => Ok(()),
        }
    }
}

/// One Euler step of the controlled price/wealth pair:
/// S' = S(1 + μ dT + σ dA), X' = X + φ (S' − S).
pub fn evolve_gbm_step(
    price: f64,
    wealth: f64,
    holding: f64,
    sigma: f64,
    mu: f64,
    d_noise: f64,
    d_time: f64,
) -> Result<(f64, f64)> {
    let next = price * (1.0 + mu * d_time + sigma * d_noise);
    if !(next > 0.0) || !next.is_finite() {
        return Err(Error::ModelBreakdown(format!(
            "price left the positive half-line: {price} -> {next}"
        )));
    }
    Ok((next, wealth + holding * (next - price)))
}

/// Price S under a skeleton Euler scheme and self-financing wealth
/// X = ∫ φ dS. State layout: `[S, X, running max of S]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmWealthModel {
    pub s0: f64,
    pub sigma: f64,
    pub mu: f64,
    pub strike: f64,
    pub payoff: PayoffSpec,
}

impl GbmWealthModel {
    pub fn new(s0: f64, sigma: f64, mu: f64, strike: f64, payoff: PayoffSpec) -> Result<Self> {
        if !(s0 > 0.0) {
            return Err(invalid(format!("initial price must be positive, got {s0}")));
        }
        if !(sigma > 0.0) {
            return Err(invalid(format!("volatility must be positive, got {sigma}")));
        }
        if !(strike > 0.0) {
            return Err(invalid(format!("strike must be positive, got {strike}")));
        }
        if !mu.is_finite() {
            return Err(invalid("drift must be finite"));
        }
        payoff.validate()?;
        Ok(Self {
            s0,
            sigma,
            mu,
            strike,
            payoff,
        })
    }

    pub fn with_payoff(mut self, payoff: PayoffSpec) -> Self {
        self.payoff = payoff;
        self
    }

    /// Call payoff (S − K)⁺.
    pub fn claim(&self, price: f64) -> f64 {
        (price - self.strike).max(0.0)
    }
}

impl ControlledModel for GbmWealthModel {
    fn state_dim(&self) -> usize {
        3
    }

    fn initial_state(&self) -> State {
        vec![self.s0, 0.0, self.s0]
    }

    fn evolve(&self, path: &[State], action: &[f64], input: &StepInput<'_>) -> Result<State> {
        let state = path.last().expect("path holds at least the initial state");
        let (s, x) = evolve_gbm_step(
            state[0],
            state[1],
            action[0],
            self.sigma,
            self.mu,
            input.increment[0],
            input.wait,
        )?;
        Ok(vec![s, x, state[2].max(s)])
    }

    fn payoff(&self, path: &[State]) -> f64 {
        let last = path.last().expect("path holds at least the initial state");
        self.payoff.evaluate(last[0], last[1], last[2], self.strike)
    }

    fn features(&self, step: usize, horizon: usize, state: &[f64]) -> Vec<f64> {
        vec![state[0], state[1], state[2], step as f64 / horizon.max(1) as f64]
    }

    fn check_skeleton(&self, params: &SkeletonParams) -> Result<()> {
        if params.d != 1 {
            return Err(invalid("the price model is driven by one-dimensional noise"));
        }
        if self.sigma * params.epsilon >= 1.0 {
            return Err(invalid(format!(
                "need sigma * epsilon < 1 for positive prices, got {}",
                self.sigma * params.epsilon
            )));
        }
        Ok(())
    }
}

/// (S, X, running max of S, step / horizon) from a stored `[S, X, …]` path.
pub fn path_feature(prefix: &[State], horizon: usize) -> Result<Vec<f64>> {
    let last = prefix.last().ok_or_else(|| invalid("feature of an empty path"))?;
    let running_max = prefix.iter().map(|s| s[0]).fold(f64::NEG_INFINITY, f64::max);
    Ok(vec![
        last[0],
        last[1],
        running_max,
        (prefix.len() - 1) as f64 / horizon.max(1) as f64,
    ])
}

/// Coefficient of a functional SDE: (t, state path, action) ↦ values.
pub type Coefficient = Arc<dyn Fn(f64, &[State], &[f64]) -> Vec<f64> + Send + Sync>;
pub type PathFunctional = Arc<dyn Fn(&[State]) -> f64 + Send + Sync>;

/// x' = x + α(t, path, u) dT + σ(t, path, u) dA, with σ stored row-major
/// (state_dim × noise_dim).
pub fn euler_skeleton_step(
    drift: &Coefficient,
    diffusion: &Coefficient,
    time: f64,
    path: &[State],
    action: &[f64],
    increment: &[f64],
    wait: f64,
) -> Result<State> {
    let x = path.last().ok_or_else(|| invalid("Euler step on an empty path"))?;
    let alpha = drift(time, path, action);
    let sigma = diffusion(time, path, action);
    let n = x.len();
    let d = increment.len();
    if alpha.len() != n || sigma.len() != n * d {
        return Err(Error::Model(format!(
            "coefficient shapes {}/{} do not match state {n} and noise {d}",
            alpha.len(),
            sigma.len()
        )));
    }
    if alpha.iter().chain(&sigma).any(|v| !v.is_finite()) {
        return Err(Error::Model(format!("non-finite coefficient at t = {time}")));
    }
    Ok((0..n)
        .map(|i| {
            let noise: f64 = (0..d).map(|j| sigma[i * d + j] * increment[j]).sum();
            x[i] + alpha[i] * wait + noise
        })
        .collect())
}

/// A controlled functional SDE discretized on the skeleton.
#[derive(Clone)]
pub struct EulerSkeletonModel {
    pub initial: State,
    pub noise_dim: usize,
    pub action_dim: usize,
    pub drift: Coefficient,
    pub diffusion: Coefficient,
    pub reward: PathFunctional,
}

impl std::fmt::Debug for EulerSkeletonModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EulerSkeletonModel")
            .field("initial", &self.initial)
            .field("noise_dim", &self.noise_dim)
            .field("action_dim", &self.action_dim)
            .finish_non_exhaustive()
    }
}

impl ControlledModel for EulerSkeletonModel {
    fn state_dim(&self) -> usize {
        self.initial.len()
    }

    fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    fn action_dim(&self) -> usize {
        self.action_dim
    }

    fn initial_state(&self) -> State {
        self.initial.clone()
    }

    fn evolve(&self, path: &[State], action: &[f64], input: &StepInput<'_>) -> Result<State> {
        euler_skeleton_step(
            &self.drift,
            &self.diffusion,
            input.time,
            path,
            action,
            input.increment,
            input.wait,
        )
    }

    fn payoff(&self, path: &[State]) -> f64 {
        (self.reward)(path)
    }
}
