use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{argmax, DpConfig, MAX_TREE_STEPS};
use crate::control::ActionGrid;
use crate::error::{Error, Result};
use crate::model::{ControlledModel, Decision, State, StepInput};
use crate::skeleton::{SkeletonParams, Step, TimingMode};

/// Upper bound on state transitions the exact engine will perform.
const TREE_WORK_BUDGET: f64 = 4.0e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeEntry {
    pub value: f64,
    /// Grid index of the optimal action; `None` at terminal nodes.
    pub action: Option<u32>,
}

/// Value and optimal action at every history node reached by the optimal
/// control. A node is the sequence of (coordinate, sign) branches taken so
/// far, encoded in base 2d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreePolicy {
    pub grid: ActionGrid,
    pub horizon: usize,
    pub branches: usize,
    pub v0: f64,
    nodes: HashMap<(u32, u64), NodeEntry>,
}

impl TreePolicy {
    pub fn node(&self, history: &[Step]) -> Option<&NodeEntry> {
        self.nodes
            .get(&(history.len() as u32, encode(history, self.branches)))
    }

    pub fn nodes(&self) -> impl Iterator<Item = (usize, &NodeEntry)> {
        self.nodes.iter().map(|((depth, _), e)| (*depth as usize, e))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub(crate) fn decide(&self, d: &Decision<'_>) -> Vec<f64> {
        let entry = self
            .node(&d.history[..d.step])
            .expect("tree policy is defined on every history node");
        let idx = entry.action.expect("decision requested at a terminal node");
        self.grid.point(idx as usize).to_vec()
    }
}

fn encode(history: &[Step], branches: usize) -> u64 {
    history
        .iter()
        .fold(0u64, |code, s| code * branches as u64 + s.branch() as u64)
}

struct TreeSolver<'a, M: ?Sized> {
    model: &'a M,
    grid: &'a ActionGrid,
    horizon: usize,
    branches: usize,
    epsilon: f64,
    wait: f64,
}

impl<M: ControlledModel + ?Sized> TreeSolver<'_, M> {
    /// Child state after taking grid action `a` and moving along `branch`.
    fn child(&self, states: &[State], depth: usize, a: usize, branch: usize) -> Result<State> {
        let step = Step::from_branch(branch, self.wait);
        let mut increment = vec![0.0; self.branches / 2];
        step.write_increment(self.epsilon, &mut increment);
        self.model.evolve(
            states,
            self.grid.point(a),
            &StepInput {
                step: depth,
                time: depth as f64 * self.wait,
                increment: &increment,
                wait: self.wait,
            },
        )
    }

    /// max over actions of the average over branches of the child values.
    fn value(&self, states: &mut Vec<State>, depth: usize) -> Result<(f64, Option<usize>)> {
        if depth == self.horizon {
            return Ok((self.model.payoff(states), None));
        }
        let mut q = Vec::with_capacity(self.grid.len());
        for a in 0..self.grid.len() {
            let mut sum = 0.0;
            for b in 0..self.branches {
                let next = self.child(states, depth, a, b)?;
                states.push(next);
                let v = self.value(states, depth + 1);
                states.pop();
                sum += v?.0;
            }
            q.push(sum / self.branches as f64);
        }
        let (best, v) = argmax(q);
        Ok((v, Some(best)))
    }

    /// Walks the optimal control and stores every node it reaches.
    fn record(
        &self,
        states: &mut Vec<State>,
        depth: usize,
        code: u64,
        table: &mut HashMap<(u32, u64), NodeEntry>,
    ) -> Result<f64> {
        let (value, action) = self.value(states, depth)?;
        table.insert(
            (depth as u32, code),
            NodeEntry {
                value,
                action: action.map(|a| a as u32),
            },
        );
        if let Some(a) = action {
            for b in 0..self.branches {
                let next = self.child(states, depth, a, b)?;
                states.push(next);
                let r = self.record(states, depth + 1, code * self.branches as u64 + b as u64, table);
                states.pop();
                r?;
            }
        }
        Ok(value)
    }
}

/// Exact backward recursion over the skeleton tree in deterministic-step
/// mode. The value at a node depends on the states reached so far, so the
/// recursion branches over actions as well as moves: the cost is of order
/// (2d·m)^N for N steps and m grid actions.
pub fn solve_exact_tree<M: ControlledModel + ?Sized>(
    model: &M,
    skeleton: &SkeletonParams,
    cfg: &DpConfig,
) -> Result<super::ValuePolicy> {
    skeleton.validate()?;
    if skeleton.timing_mode != TimingMode::DeterministicStepCount {
        return Err(Error::UnsupportedMode(
            "the exact tree engine needs deterministic step counts".into(),
        ));
    }
    model.check_skeleton(skeleton)?;
    let horizon = skeleton.steps();
    if horizon > MAX_TREE_STEPS {
        return Err(Error::Resource(format!(
            "{horizon} steps exceed the exact-tree limit of {MAX_TREE_STEPS}"
        )));
    }
    let branches = 2 * skeleton.d;
    let fan = (branches * cfg.grid.len()) as f64;
    let work: f64 = (1..=horizon).map(|j| fan.powi(j as i32)).sum();
    if work > TREE_WORK_BUDGET {
        return Err(Error::Resource(format!(
            "exact tree needs about {work:.3e} transitions"
        )));
    }
    let solver = TreeSolver {
        model,
        grid: &cfg.grid,
        horizon,
        branches,
        epsilon: skeleton.epsilon,
        wait: skeleton.mean_wait(),
    };
    let mut nodes = HashMap::new();
    let mut states = vec![model.initial_state()];
    let v0 = solver.record(&mut states, 0, 0, &mut nodes)?;
    Ok(super::ValuePolicy::Tree(TreePolicy {
        grid: cfg.grid.clone(),
        horizon,
        branches,
        v0,
        nodes,
    }))
}
