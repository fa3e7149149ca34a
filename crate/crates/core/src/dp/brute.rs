use crate::control::ActionGrid;
use crate::error::{invalid, Error, Result};
use crate::model::{ControlledModel, State, StepInput};
use crate::skeleton::{SkeletonParams, Step, TimingMode};

const BRUTE_FORCE_BUDGET: f64 = 2.0e8;

/// sup over all adapted grid-valued controls of E ξ, by enumeration.
///
/// A control assigns one grid action to every history node of depth
/// < `n_steps`. Each control is scored by summing the reward over all
/// (2d)^n equally likely skeleton paths.
pub fn brute_force_value<M: ControlledModel + ?Sized>(
    model: &M,
    skeleton: &SkeletonParams,
    grid: &ActionGrid,
    n_steps: usize,
) -> Result<f64> {
    if skeleton.timing_mode != TimingMode::DeterministicStepCount {
        return Err(Error::UnsupportedMode(
            "brute force needs deterministic step counts".into(),
        ));
    }
    if n_steps > 4 {
        return Err(Error::Resource(format!("{n_steps} steps is beyond brute force")));
    }
    model.check_skeleton(skeleton)?;
    let branches = 2 * skeleton.d;
    let m = grid.len();
    // Node (depth j, code c) sits at offset[j] + c in level order.
    let mut offsets = vec![0usize];
    for j in 0..n_steps {
        offsets.push(offsets[j] + branches.pow(j as u32));
    }
    let internal = offsets[n_steps];
    let leaves = branches.pow(n_steps as u32);
    let work = (m as f64).powi(internal as i32) * (leaves * n_steps.max(1)) as f64;
    if work > BRUTE_FORCE_BUDGET {
        return Err(Error::Resource(format!(
            "brute force needs about {work:.3e} transitions"
        )));
    }
    if m == 0 {
        return Err(invalid("empty action grid"));
    }

    let wait = skeleton.mean_wait();
    let weight = 1.0 / leaves as f64;
    let mut assignment = vec![0usize; internal];
    let mut best = f64::NEG_INFINITY;
    let mut increment = vec![0.0; skeleton.d];
    let mut states: Vec<State> = Vec::with_capacity(n_steps + 1);
    loop {
        let mut expected = 0.0;
        for leaf in 0..leaves {
            states.clear();
            states.push(model.initial_state());
            let mut code = 0usize;
            let mut rest = leaf;
            let mut digits = vec![0usize; n_steps];
            for slot in digits.iter_mut().rev() {
                *slot = rest % branches;
                rest /= branches;
            }
            for (j, &branch) in digits.iter().enumerate() {
                let action = grid.point(assignment[offsets[j] + code]);
                Step::from_branch(branch, wait).write_increment(skeleton.epsilon, &mut increment);
                let next = model.evolve(
                    &states,
                    action,
                    &StepInput {
                        step: j,
                        time: j as f64 * wait,
                        increment: &increment,
                        wait,
                    },
                )?;
                states.push(next);
                code = code * branches + branch;
            }
            expected += weight * model.payoff(&states);
        }
        if expected > best {
            best = expected;
        }
        // Odometer over all assignments.
        let mut pos = 0;
        loop {
            if pos == internal {
                return Ok(best);
            }
            assignment[pos] += 1;
            if assignment[pos] < m {
                break;
            }
            assignment[pos] = 0;
            pos += 1;
        }
    }
}
