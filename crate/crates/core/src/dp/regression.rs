//! Regression Monte Carlo engine.
//!
//! Paths are simulated forward under exploratory actions. Going backward,
//! at step j every path is re-evolved one step under each grid action a,
//! the continuation value at j+1 is read off (the reward at the terminal
//! step, otherwise the max over actions of the step j+1 fit) and regressed on
//! polynomial features of the state at j. The fitted values are Q̂_j(·, a).
//!
//! The covariates are the model's features plus the elapsed skeleton time
//! T^k_j / T. With sampled waiting times the reward is read at the last
//! stopping time before T, so the value depends on the clock as well as the
//! state; with deterministic steps the clock is constant at each j and drops
//! out.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::basis::{dot, LeastSquares, PolynomialBasis, Standardizer};
use super::{argmax, Continuation, DpConfig, StepDiagnostics, ValuePolicy};
use crate::control::ActionGrid;
use crate::error::{invalid, Result};
use crate::exit_time::ExitTimeSampler;
use crate::model::{ControlledModel, State, StepInput};
use crate::rng::{substream, Purpose};
use crate::skeleton::{sample_skeleton_path, SkeletonParams, SkeletonPath, Step};
use crate::stats::Welford;

/// Fitted continuation values at one step, one coefficient vector per grid
/// action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFit {
    pub standardizer: Standardizer,
    pub coefficients: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionPolicy {
    pub grid: ActionGrid,
    pub horizon: usize,
    /// Terminal time T, the clock covariate's scale.
    pub horizon_time: f64,
    pub basis: PolynomialBasis,
    pub steps: Vec<StepFit>,
    pub v0: f64,
    pub v0_std_error: f64,
    pub diagnostics: Vec<StepDiagnostics>,
}

impl RegressionPolicy {
    /// Q̂_j(features, a) for every grid action.
    pub fn continuation(&self, step: usize, features: &[f64]) -> Vec<f64> {
        let fit = &self.steps[step];
        let phi = self.basis.eval(&fit.standardizer.apply(features));
        fit.coefficients.iter().map(|c| dot(c, &phi)).collect()
    }

    /// Regression covariates at decision `step` reached at skeleton time
    /// `time`.
    pub fn covariates<M: ControlledModel + ?Sized>(
        &self,
        model: &M,
        step: usize,
        time: f64,
        state: &[f64],
    ) -> Vec<f64> {
        covariates(model, step, self.horizon, time, self.horizon_time, state)
    }

    /// Grid index maximizing Q̂_j, lowest index on ties.
    pub fn best_action(&self, step: usize, features: &[f64]) -> usize {
        argmax(self.continuation(step, features)).0
    }
}

fn covariates<M: ControlledModel + ?Sized>(
    model: &M,
    step: usize,
    horizon: usize,
    time: f64,
    horizon_time: f64,
    state: &[f64],
) -> Vec<f64> {
    let mut f = model.features(step, horizon, state);
    f.push(time / horizon_time);
    f
}

struct SimulatedPath {
    path: SkeletonPath,
    states: Vec<State>,
    terminal: usize,
    payoff: f64,
}

fn simulate_exploration<M: ControlledModel + ?Sized>(
    model: &M,
    skeleton: &SkeletonParams,
    grid: &ActionGrid,
    horizon: usize,
    seed: u64,
    id: u64,
) -> Result<SimulatedPath> {
    let sampler = ExitTimeSampler::shared();
    let mut noise_rng = substream(seed, Purpose::Skeleton, id);
    let mut action_rng = substream(seed, Purpose::Exploration, id);
    let path = sample_skeleton_path(skeleton, horizon, &sampler, &mut noise_rng);
    let mut states = Vec::with_capacity(horizon + 1);
    states.push(model.initial_state());
    let mut increment = vec![0.0; skeleton.d];
    for (j, step) in path.steps.iter().enumerate() {
        let a = action_rng.random_range(0..grid.len());
        step.write_increment(path.epsilon, &mut increment);
        let next = model.evolve(
            &states,
            grid.point(a),
            &StepInput {
                step: j,
                time: path.stop_times[j],
                increment: &increment,
                wait: step.wait,
            },
        )?;
        states.push(next);
    }
    let terminal = path.terminal_index(skeleton.horizon);
    let payoff = model.payoff(&states[..=terminal]);
    Ok(SimulatedPath {
        path,
        states,
        terminal,
        payoff,
    })
}

/// Backward induction with regression estimates of the conditional
/// expectations.
pub fn solve_regression_mc<M: ControlledModel + ?Sized>(
    model: &M,
    skeleton: &SkeletonParams,
    cfg: &DpConfig,
) -> Result<ValuePolicy> {
    skeleton.validate()?;
    model.check_skeleton(skeleton)?;
    let horizon = skeleton.steps();
    let grid = &cfg.grid;
    let horizon_time = skeleton.horizon;
    let feature_dim = covariates(model, 0, horizon, 0.0, horizon_time, &model.initial_state()).len();
    let basis = PolynomialBasis::new(feature_dim, cfg.basis_degree);
    if cfg.n_paths < 10 * basis.len() {
        return Err(invalid(format!(
            "{} paths are too few for {} basis functions (need at least {})",
            cfg.n_paths,
            basis.len(),
            10 * basis.len()
        )));
    }

    let paths = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|id| simulate_exploration(model, skeleton, grid, horizon, cfg.seed, id))
        .collect::<Result<Vec<_>>>()?;

    let m = grid.len();
    let q = basis.len();
    let mut fits: Vec<Option<StepFit>> = vec![None; horizon];
    let mut diagnostics = Vec::with_capacity(horizon);
    let mut first: Option<(Vec<usize>, Vec<Vec<f64>>, Vec<Vec<f64>>)> = None;

    for j in (0..horizon).rev() {
        // Paths whose reward was already read off before step j carry no
        // information about Q_j.
        let active: Vec<usize> = (0..paths.len()).filter(|&i| paths[i].terminal > j).collect();
        let features: Vec<Vec<f64>> = active
            .iter()
            .map(|&i| {
                let p = &paths[i];
                covariates(model, j, horizon, p.path.stop_times[j], horizon_time, &p.states[j])
            })
            .collect();
        let standardizer = Standardizer::fit(&features);
        let design: Vec<Vec<f64>> = features
            .iter()
            .map(|f| basis.eval(&standardizer.apply(f)))
            .collect();
        let ls = LeastSquares::new(&design, q);

        let next_fit = fits.get(j + 1).and_then(Option::as_ref);
        let partial = RegressionPolicyView {
            basis: &basis,
            fit: next_fit,
            horizon,
            horizon_time,
        };
        // targets[i][a] for the i-th active path.
        let targets = active
            .par_iter()
            .map(|&i| continuation_targets(model, &paths[i], j, grid, cfg.continuation, &partial))
            .collect::<Result<Vec<Vec<f64>>>>()?;

        let coefficients: Vec<Vec<f64>> = (0..m)
            .map(|a| {
                let y: Vec<f64> = targets.iter().map(|t| t[a]).collect();
                ls.solve(&design, &y)
            })
            .collect();
        diagnostics.push(StepDiagnostics {
            step: j,
            paths_used: active.len(),
            condition: ls.condition,
            ridge_applied: ls.ridge_applied,
            active_features: standardizer.active(),
        });
        fits[j] = Some(StepFit {
            standardizer,
            coefficients,
        });
        if j == 0 {
            first = Some((active, design, targets));
        }
    }
    diagnostics.reverse();

    let steps: Vec<StepFit> = fits.into_iter().map(|f| f.expect("every step fitted")).collect();
    // Per path: the fitted value and the realized target of the chosen
    // action, or the reward itself when it is read off at time zero.
    let mut value = Welford::default();
    let mut realized = Welford::default();
    let mut fitted = vec![None; paths.len()];
    if let Some((active, design, targets)) = &first {
        for ((&i, phi), t) in active.iter().zip(design).zip(targets) {
            let (a, q) = argmax(steps[0].coefficients.iter().map(|c| dot(c, phi)));
            fitted[i] = Some((q, t[a]));
        }
    }
    for (p, f) in paths.iter().zip(&fitted) {
        let (q, r) = f.unwrap_or((p.payoff, p.payoff));
        value.push(q);
        realized.push(r);
    }
    let (v0, v0_std_error) = (value.mean(), realized.estimate().std_error);

    Ok(ValuePolicy::Regression(RegressionPolicy {
        grid: grid.clone(),
        horizon,
        horizon_time,
        basis,
        steps,
        v0,
        v0_std_error,
        diagnostics,
    }))
}

struct RegressionPolicyView<'a> {
    basis: &'a PolynomialBasis,
    fit: Option<&'a StepFit>,
    horizon: usize,
    horizon_time: f64,
}

impl RegressionPolicyView<'_> {
    fn value<M: ControlledModel + ?Sized>(&self, model: &M, step: usize, time: f64, state: &[f64]) -> f64 {
        let fit = self.fit.expect("continuation fit exists before the terminal step");
        let x = covariates(model, step, self.horizon, time, self.horizon_time, state);
        let phi = self.basis.eval(&fit.standardizer.apply(&x));
        argmax(fit.coefficients.iter().map(|c| dot(c, &phi))).1
    }
}

/// Continuation value at j+1 of path `p` after replacing its step-j action
/// by each grid action.
fn continuation_targets<M: ControlledModel + ?Sized>(
    model: &M,
    p: &SimulatedPath,
    j: usize,
    grid: &ActionGrid,
    continuation: Continuation,
    next: &RegressionPolicyView<'_>,
) -> Result<Vec<f64>> {
    if j + 1 > p.terminal {
        return Ok(vec![p.payoff; grid.len()]);
    }
    let prefix = &p.states[..=j];
    let realized = p.path.steps[j];
    let moves: Vec<Step> = match continuation {
        Continuation::RealizedIncrement => vec![realized],
        Continuation::SignAveraged => (0..2 * p.path.d)
            .map(|b| Step::from_branch(b, realized.wait))
            .collect(),
    };
    let weight = 1.0 / moves.len() as f64;
    let mut increment = vec![0.0; p.path.d];
    let mut scratch: Vec<State> = prefix.to_vec();
    let mut targets = vec![0.0; grid.len()];
    for step in &moves {
        step.write_increment(p.path.epsilon, &mut increment);
        let input = StepInput {
            step: j,
            time: p.path.stop_times[j],
            increment: &increment,
            wait: step.wait,
        };
        for (a, target) in targets.iter_mut().enumerate() {
            let next_state = model.evolve(prefix, grid.point(a), &input)?;
            let value = if j + 1 == p.terminal {
                scratch.push(next_state);
                let v = model.payoff(&scratch);
                scratch.pop();
                v
            } else {
                next.value(model, j + 1, p.path.stop_times[j] + step.wait, &next_state)
            };
            *target += weight * value;
        }
    }
    Ok(targets)
}
