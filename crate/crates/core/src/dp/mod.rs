//! Backward dynamic programming on the skeleton.
//!
//! V^k at the last step is the reward; before that it is the best grid
//! action's conditional expectation of V^k one step later. Two engines
//! compute the conditional expectation: [`solve_exact_tree`] averages over
//! the 2d equally likely skeleton moves, [`solve_regression_mc`] regresses
//! simulated continuation values on polynomial path features.
//! [`brute_force_value`] maximizes over every adapted grid control directly
//! and serves as an oracle for small instances.

mod basis;
mod brute;
mod regression;
mod tree;

pub use basis::{LeastSquares, PolynomialBasis, Standardizer};
pub use brute::brute_force_value;
pub use regression::{solve_regression_mc, RegressionPolicy, StepFit};
pub use tree::{solve_exact_tree, NodeEntry, TreePolicy};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::ActionGrid;
use crate::error::{invalid, Result};
use crate::model::{simulate, ControlledModel, Decision, Policy};
use crate::rng::{substream, Purpose};
use crate::skeleton::{sample_skeleton_path, SkeletonParams};
use crate::exit_time::ExitTimeSampler;
use crate::stats::MeanEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    ExactTree,
    RegressionMc,
}

/// How actions are chosen while simulating regression paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exploration {
    /// Independent uniform draws from the action grid at every step.
    #[default]
    UniformGrid,
}

/// Regression target for action a at step j.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Continuation {
    /// Re-evolve step j under a with the path's own increment.
    RealizedIncrement,
    /// Average the re-evolved value over the 2d equally likely step-j moves,
    /// keeping the path's waiting time. Same conditional mean, and no sign
    /// noise in the targets.
    #[default]
    SignAveraged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpConfig {
    pub engine: Engine,
    pub grid: ActionGrid,
    pub n_paths: usize,
    pub basis_degree: usize,
    pub seed: u64,
    pub exploration: Exploration,
    pub continuation: Continuation,
}

/// Largest step count the exact engine will enumerate.
pub const MAX_TREE_STEPS: usize = 24;

impl DpConfig {
    pub fn exact_tree(grid: ActionGrid) -> Self {
        Self {
            engine: Engine::ExactTree,
            grid,
            n_paths: 0,
            basis_degree: 2,
            seed: 0,
            exploration: Exploration::UniformGrid,
            continuation: Continuation::SignAveraged,
        }
    }

    pub fn regression(grid: ActionGrid, n_paths: usize, basis_degree: usize, seed: u64) -> Self {
        Self {
            engine: Engine::RegressionMc,
            grid,
            n_paths,
            basis_degree,
            seed,
            exploration: Exploration::UniformGrid,
            continuation: Continuation::SignAveraged,
        }
    }
}

/// Per-step regression diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub step: usize,
    /// Paths still running at this step, i.e. used in the fit.
    pub paths_used: usize,
    /// Condition number of the normal matrix; `None` when it is singular.
    pub condition: Option<f64>,
    pub ridge_applied: bool,
    pub active_features: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ValuePolicy {
    Tree(TreePolicy),
    Regression(RegressionPolicy),
}

impl ValuePolicy {
    /// V^k(0).
    pub fn v0(&self) -> f64 {
        match self {
            ValuePolicy::Tree(t) => t.v0,
            ValuePolicy::Regression(r) => r.v0,
        }
    }

    /// Standard error of V^k(0); zero for the exact engine.
    pub fn v0_std_error(&self) -> f64 {
        match self {
            ValuePolicy::Tree(_) => 0.0,
            ValuePolicy::Regression(r) => r.v0_std_error,
        }
    }

    pub fn horizon(&self) -> usize {
        match self {
            ValuePolicy::Tree(t) => t.horizon,
            ValuePolicy::Regression(r) => r.horizon,
        }
    }

    pub fn grid(&self) -> &ActionGrid {
        match self {
            ValuePolicy::Tree(t) => &t.grid,
            ValuePolicy::Regression(r) => &r.grid,
        }
    }

    pub fn diagnostics(&self) -> &[StepDiagnostics] {
        match self {
            ValuePolicy::Tree(_) => &[],
            ValuePolicy::Regression(r) => &r.diagnostics,
        }
    }

    /// Attaches the model whose features the regression policy reads.
    pub fn bind<'a, M: ControlledModel + ?Sized>(&'a self, model: &'a M) -> BoundPolicy<'a, M> {
        BoundPolicy { policy: self, model }
    }
}

pub struct BoundPolicy<'a, M: ?Sized> {
    policy: &'a ValuePolicy,
    model: &'a M,
}

impl<M: ControlledModel + ?Sized> Policy for BoundPolicy<'_, M> {
    fn decide(&self, d: &Decision<'_>) -> Vec<f64> {
        match self.policy {
            ValuePolicy::Tree(t) => t.decide(d),
            ValuePolicy::Regression(r) => {
                let time = d.history[..d.step].iter().fold(0.0, |t, s| t + s.wait);
                let x = r.covariates(self.model, d.step, time, &d.states[d.step]);
                r.grid.point(r.best_action(d.step, &x)).to_vec()
            }
        }
    }
}

/// Solves with whichever engine `cfg` names.
pub fn solve<M: ControlledModel + ?Sized>(
    model: &M,
    skeleton: &SkeletonParams,
    cfg: &DpConfig,
) -> Result<ValuePolicy> {
    match cfg.engine {
        Engine::ExactTree => solve_exact_tree(model, skeleton, cfg),
        Engine::RegressionMc => solve_regression_mc(model, skeleton, cfg),
    }
}

/// Index of the largest value, lowest index on ties.
pub(crate) fn argmax(values: impl IntoIterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// Fresh Monte Carlo estimate of E ξ under `policy`.
pub fn evaluate_policy<M, P>(
    model: &M,
    skeleton: &SkeletonParams,
    policy: &P,
    n_paths: usize,
    seed: u64,
) -> Result<MeanEstimate>
where
    M: ControlledModel + ?Sized,
    P: Policy + ?Sized,
{
    if n_paths < 2 {
        return Err(invalid("policy evaluation needs at least two paths"));
    }
    model.check_skeleton(skeleton)?;
    let n = skeleton.steps();
    let sampler = ExitTimeSampler::shared();
    let payoffs = (0..n_paths as u64)
        .into_par_iter()
        .map(|id| {
            let mut rng = substream(seed, Purpose::Evaluation, id);
            let path = sample_skeleton_path(skeleton, n, &sampler, &mut rng);
            simulate(model, &path, skeleton.horizon, policy).map(|t| t.payoff)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(MeanEstimate::from_samples(&payoffs))
}
