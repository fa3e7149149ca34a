//! Action cube, its uniform grids, and adapted step controls.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::skeleton::Step;

/// The compact action space A = [−a, a]^r.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionCube {
    pub dim: usize,
    pub half_width: f64,
}

impl ActionCube {
    pub fn new(dim: usize, half_width: f64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("action dimension must be at least 1"));
        }
        if !(half_width > 0.0) {
            return Err(invalid(format!("cube half-width must be positive, got {half_width}")));
        }
        Ok(Self { dim, half_width })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim && x.iter().all(|v| v.abs() <= self.half_width)
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(-self.half_width, self.half_width)
    }
}

/// Uniform lattice on the cube with `points_per_axis` points per axis,
/// enumerated with the first axis varying slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionGrid {
    pub cube: ActionCube,
    pub points_per_axis: usize,
    points: Vec<Vec<f64>>,
}

/// All m^r points of the uniform grid on `cube`, corners included.
pub fn grid_points(cube: ActionCube, m: usize) -> Result<ActionGrid> {
    if m < 2 {
        return Err(invalid(format!("grid needs at least 2 points per axis, got {m}")));
    }
    let total = m
        .checked_pow(cube.dim as u32)
        .filter(|&n| n <= 1 << 24)
        .ok_or_else(|| Error::Resource(format!("{m}^{} grid points", cube.dim)))?;
    let span = (m - 1) as f64;
    // a(2i − (m−1))/(m−1) hits ±a and the centre exactly.
    let axis: Vec<f64> = (0..m)
        .map(|i| (2.0 * i as f64 - span) / span * cube.half_width)
        .collect();
    let points = (0..total)
        .map(|mut idx| {
            let mut p = vec![0.0; cube.dim];
            for slot in p.iter_mut().rev() {
                *slot = axis[idx % m];
                idx /= m;
            }
            p
        })
        .collect();
    Ok(ActionGrid {
        cube,
        points_per_axis: m,
        points,
    })
}

impl ActionGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Index of the grid point closest to `x` (lowest index on ties).
    pub fn nearest(&self, x: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, p) in self.points.iter().enumerate() {
            let d: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }
}

/// Action rule for one step; it sees only the history before that step.
pub type Rule = Arc<dyn Fn(&[Step]) -> Vec<f64> + Send + Sync>;

/// A predictable control on the step interval (start, end]: the action for
/// step j+1 is a function of the first j skeleton steps.
#[derive(Clone)]
pub struct StepControl {
    start: usize,
    rules: Vec<Rule>,
}

impl fmt::Debug for StepControl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StepControl")
            .field("start", &self.start)
            .field("end", &self.end())
            .finish()
    }
}

impl StepControl {
    pub fn empty(at: usize) -> Self {
        Self {
            start: at,
            rules: Vec::new(),
        }
    }

    pub fn from_rules(start: usize, rules: Vec<Rule>) -> Self {
        Self { start, rules }
    }

    /// `f(j, history)` gives the action taken at decision index j.
    pub fn from_fn<F>(start: usize, end: usize, f: F) -> Self
    where
        F: Fn(usize, &[Step]) -> Vec<f64> + Send + Sync + 'static,
    {
        let f = Arc::new(f);
        let rules = (start..end)
            .map(|j| {
                let f = f.clone();
                Arc::new(move |h: &[Step]| f(j, h)) as Rule
            })
            .collect();
        Self { start, rules }
    }

    pub fn constant(start: usize, end: usize, action: Vec<f64>) -> Self {
        Self::from_fn(start, end, move |_, _| action.clone())
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.start + self.rules.len()
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Action u_j, evaluated on the first j steps of `history`.
    pub fn action(&self, j: usize, history: &[Step]) -> Result<Vec<f64>> {
        if j < self.start || j >= self.end() {
            return Err(invalid(format!(
                "decision {j} outside control interval ({}, {}]",
                self.start,
                self.end()
            )));
        }
        if history.len() < j {
            return Err(invalid(format!(
                "decision {j} needs {j} steps of history, got {}",
                history.len()
            )));
        }
        Ok((self.rules[j - self.start])(&history[..j]))
    }

    /// The sub-control on (from, to].
    pub fn slice(&self, from: usize, to: usize) -> Result<Self> {
        if from < self.start || to > self.end() || from > to {
            return Err(invalid(format!(
                "cannot slice ({from}, {to}] out of ({}, {}]",
                self.start,
                self.end()
            )));
        }
        Ok(Self {
            start: from,
            rules: self.rules[from - self.start..to - self.start].to_vec(),
        })
    }

    /// Splices `other` in after decision `at` on the event `event(history[..at])`.
    pub fn splice_on_event<E>(&self, other: &StepControl, at: usize, event: E) -> Result<Self>
    where
        E: Fn(&[Step]) -> bool + Send + Sync + 'static,
    {
        if self.start != other.start || self.end() != other.end() {
            return Err(Error::InvalidComposition(
                "spliced controls must share their interval".into(),
            ));
        }
        if at < self.start || at > self.end() {
            return Err(invalid(format!("splice point {at} outside the interval")));
        }
        let event = Arc::new(event);
        let rules = self
            .rules
            .iter()
            .zip(&other.rules)
            .enumerate()
            .map(|(i, (mine, theirs))| {
                if self.start + i < at {
                    mine.clone()
                } else {
                    let (mine, theirs, event) = (mine.clone(), theirs.clone(), event.clone());
                    Arc::new(move |h: &[Step]| {
                        if event(&h[..at]) {
                            theirs(h)
                        } else {
                            mine(h)
                        }
                    }) as Rule
                }
            })
            .collect();
        Ok(Self {
            start: self.start,
            rules,
        })
    }
}

/// u ⊗_ℓ v: follow u up to ℓ and v afterwards.
pub fn concat(u: &StepControl, v: &StepControl) -> Result<StepControl> {
    if u.end() != v.start() {
        return Err(Error::InvalidComposition(format!(
            "first control ends at {}, second starts at {}",
            u.end(),
            v.start()
        )));
    }
    let mut rules = u.rules.clone();
    rules.extend(v.rules.iter().cloned());
    Ok(StepControl {
        start: u.start,
        rules,
    })
}

/// The prefix of `u` up to decision `p`.
pub fn restrict(u: &StepControl, p: usize) -> Result<StepControl> {
    if p > u.end() {
        return Err(invalid(format!("cannot restrict to {p} beyond {}", u.end())));
    }
    u.slice(u.start(), p)
}
