//! Polynomial regression machinery for the Monte Carlo engine.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use serde::{Deserialize, Serialize};

/// Above this condition number the normal equations are ridge-regularized.
pub const CONDITION_LIMIT: f64 = 1e10;
/// Ridge strength relative to trace(ΦᵀΦ)/q.
pub const RIDGE_FACTOR: f64 = 1e-8;

/// All monomials of total degree ≤ `degree` in `dim` variables, constant
/// term first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialBasis {
    dim: usize,
    exponents: Vec<Vec<u8>>,
}

impl PolynomialBasis {
    pub fn new(dim: usize, degree: usize) -> Self {
        let mut exponents = Vec::new();
        for total in 0..=degree {
            let mut current = vec![0u8; dim];
            push_compositions(&mut exponents, &mut current, 0, total);
        }
        Self { dim, exponents }
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        for (slot, exps) in out.iter_mut().zip(&self.exponents) {
            *slot = exps
                .iter()
                .zip(x)
                .map(|(&e, &v)| v.powi(e as i32))
                .product();
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(x, &mut out);
        out
    }
}

fn push_compositions(out: &mut Vec<Vec<u8>>, current: &mut [u8], pos: usize, remaining: usize) {
    if pos == current.len() {
        if remaining == 0 {
            out.push(current.to_vec());
        }
        return;
    }
    for e in (0..=remaining).rev() {
        current[pos] = e as u8;
        push_compositions(out, current, pos + 1, remaining - e);
    }
    current[pos] = 0;
}

/// Centres and scales covariates; constant covariates are zeroed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    mean: Vec<f64>,
    /// Reciprocal scale, zero for dropped covariates.
    inv_scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let inv_scale = var
            .iter()
            .zip(&mean)
            .map(|(s, m)| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 * (1.0 + m.abs()) {
                    1.0 / sd
                } else {
                    0.0
                }
            })
            .collect();
        Self { mean, inv_scale }
    }

    pub fn active(&self) -> usize {
        self.inv_scale.iter().filter(|s| **s != 0.0).count()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.inv_scale)
            .map(|((v, m), s)| (v - m) * s)
            .collect()
    }
}

/// Factored normal equations of a fixed design matrix.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    factor: Cholesky<f64, Dyn>,
    pub condition: Option<f64>,
    pub ridge_applied: bool,
}

impl LeastSquares {
    /// `design` rows have `q` entries. Rows are accumulated in order, so the
    /// result does not depend on scheduling.
    pub fn new(design: &[Vec<f64>], q: usize) -> Self {
        let mut gram = DMatrix::<f64>::zeros(q, q);
        for row in design {
            for i in 0..q {
                let ri = row[i];
                if ri == 0.0 {
                    continue;
                }
                for j in i..q {
                    gram[(i, j)] += ri * row[j];
                }
            }
        }
        for i in 0..q {
            for j in 0..i {
                gram[(i, j)] = gram[(j, i)];
            }
        }
        let eig = SymmetricEigen::new(gram.clone());
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        let condition = (min > 0.0).then(|| max / min);
        let ridge_applied = condition.is_none_or(|c| c > CONDITION_LIMIT);
        if ridge_applied {
            let lambda = RIDGE_FACTOR * gram.trace().max(f64::MIN_POSITIVE) / q as f64;
            for i in 0..q {
                gram[(i, i)] += lambda;
            }
        }
        let factor = Cholesky::new(gram).expect("regularized normal matrix is positive definite");
        Self {
            factor,
            condition,
            ridge_applied,
        }
    }

    pub fn solve(&self, design: &[Vec<f64>], targets: &[f64]) -> Vec<f64> {
        let q = self.factor.l_dirty().nrows();
        let mut rhs = DVector::<f64>::zeros(q);
        for (row, y) in design.iter().zip(targets) {
            for i in 0..q {
                rhs[i] += row[i] * y;
            }
        }
        self.factor.solve(&rhs).iter().copied().collect()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
