//! Quadratic hedging of a European call under the skeleton price model.
//!
//! With μ = 0 and deterministic step counts the skeleton price moves by a
//! factor 1 ± σε_k with probability ½ each. That two-point market is
//! complete: the variance-optimal holding at each node is the replicating
//! ratio, the hedging residual H − X(T) is the tree price on every path, and
//! minimizing E(c + X(T) − H)² over c recovers it.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::exit_time::ExitTimeSampler;
use crate::model::{simulate, Decision, GbmWealthModel, PayoffSpec, Policy};
use crate::normal::norm_cdf;
use crate::rng::{substream, Purpose};
use crate::skeleton::{epsilon_schedule, sample_skeleton_path, SkeletonParams, TimingMode};

/// Black–Scholes price of a call with zero rate, S0Φ(d1) − KΦ(d2).
pub fn bs_call_price(s0: f64, strike: f64, sigma: f64, maturity: f64) -> Result<f64> {
    for (name, v) in [("s0", s0), ("strike", strike), ("sigma", sigma), ("maturity", maturity)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid(format!("{name} must be positive, got {v}")));
        }
    }
    let vol = sigma * maturity.sqrt();
    let d1 = ((s0 / strike).ln() + 0.5 * vol * vol) / vol;
    let d2 = d1 - vol;
    Ok(s0 * norm_cdf(d1) - strike * norm_cdf(d2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HedgingSpec {
    pub s0: f64,
    pub sigma: f64,
    pub mu: f64,
    pub strike: f64,
    pub maturity: f64,
    /// Half-width a of the admissible holdings; `f64::INFINITY` disables
    /// clamping.
    pub control_bound: f64,
    pub k: u32,
    pub n_mc: usize,
    pub timing_mode: TimingMode,
}

impl Default for HedgingSpec {
    fn default() -> Self {
        Self {
            s0: 49.0,
            sigma: 0.2,
            mu: 0.0,
            strike: 55.0,
            maturity: 1.0,
            control_bound: 1.0,
            k: 3,
            n_mc: 20_000,
            timing_mode: TimingMode::DeterministicStepCount,
        }
    }
}

impl HedgingSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("s0", self.s0),
            ("sigma", self.sigma),
            ("strike", self.strike),
            ("maturity", self.maturity),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.control_bound > 0.0) {
            return Err(invalid("control bound must be positive"));
        }
        if !self.mu.is_finite() {
            return Err(invalid("drift must be finite"));
        }
        if self.n_mc < 2 {
            return Err(invalid("need at least two Monte Carlo paths"));
        }
        let eps = epsilon_schedule(self.k)?;
        if self.sigma * eps >= 1.0 {
            return Err(invalid(format!(
                "sigma * epsilon_k = {} must be below 1",
                self.sigma * eps
            )));
        }
        Ok(())
    }

    pub fn skeleton(&self) -> Result<SkeletonParams> {
        SkeletonParams::new(self.k, 1, self.maturity, self.timing_mode)
    }

    /// Price/wealth model with reward −ϱ_c.
    pub fn model(&self, premium: f64) -> Result<GbmWealthModel> {
        GbmWealthModel::new(
            self.s0,
            self.sigma,
            self.mu,
            self.strike,
            PayoffSpec::quadratic_hedging(premium),
        )
    }

    pub fn true_price(&self) -> Result<f64> {
        bs_call_price(self.s0, self.strike, self.sigma, self.maturity)
    }
}

/// Recombining lattice of skeleton prices: node (n, j) has j up-moves in n
/// steps.
#[derive(Debug, Clone, PartialEq)]
struct PriceLattice {
    s0: f64,
    up: f64,
    down: f64,
}

impl PriceLattice {
    fn new(spec: &HedgingSpec, skeleton: &SkeletonParams) -> Self {
        let drift = spec.mu * skeleton.mean_wait();
        let jump = spec.sigma * skeleton.epsilon;
        Self {
            s0: spec.s0,
            up: 1.0 + drift + jump,
            down: 1.0 + drift - jump,
        }
    }

    fn price(&self, n: usize, ups: usize) -> f64 {
        self.s0 * self.up.powi(ups as i32) * self.down.powi((n - ups) as i32)
    }
}

/// E(S_N − K)⁺ on the symmetric skeleton tree.
pub fn binomial_call_price(spec: &HedgingSpec) -> Result<f64> {
    spec.validate()?;
    let skeleton = spec.skeleton()?;
    let n = skeleton.steps();
    let lattice = PriceLattice::new(spec, &skeleton);
    let mut values: Vec<f64> = (0..=n)
        .map(|j| (lattice.price(n, j) - spec.strike).max(0.0))
        .collect();
    for depth in (0..n).rev() {
        for j in 0..=depth {
            values[j] = 0.5 * (values[j] + values[j + 1]);
        }
        values.truncate(depth + 1);
    }
    Ok(values[0])
}

const CLAMP_SLACK: f64 = 1e-9;

/// Closed-form optimal holdings v*_n on the skeleton tree.
///
/// Backward from v*_N = 0, each node takes
/// v*_n = E_n[(H − Σ_{l>n} v*_l ΔS_{l+1}) ΔS_{n+1}] / E_n[ΔS²_{n+1}],
/// clamped to [−a, a]. With μ = 0 the denominator is (S_n σ ε_k)².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticHedge {
    pub horizon: usize,
    /// holdings[n][j] for j up-moves among the first n steps.
    holdings: Vec<Vec<f64>>,
    /// E_0[H − Σ v*_l ΔS_{l+1}], the premium implied by the hedge.
    pub implied_premium: f64,
    /// Nodes at which the unconstrained holding left [−a, a].
    pub clamp_events: usize,
}

impl AnalyticHedge {
    pub fn build(spec: &HedgingSpec) -> Result<Self> {
        spec.validate()?;
        let skeleton = spec.skeleton()?;
        let n = skeleton.steps();
        let lattice = PriceLattice::new(spec, &skeleton);
        let bound = spec.control_bound;
        // residual[j] = E[H − future gains] at the current depth.
        let mut residual: Vec<f64> = (0..=n)
            .map(|j| (lattice.price(n, j) - spec.strike).max(0.0))
            .collect();
        let mut holdings = vec![Vec::new(); n];
        let mut clamp_events = 0;
        for depth in (0..n).rev() {
            let mut level = Vec::with_capacity(depth + 1);
            let mut next = Vec::with_capacity(depth + 1);
            for j in 0..=depth {
                let s = lattice.price(depth, j);
                let du = lattice.price(depth + 1, j + 1) - s;
                let dd = lattice.price(depth + 1, j) - s;
                let (wu, wd) = (residual[j + 1], residual[j]);
                let numerator = 0.5 * (wu * du + wd * dd);
                let denominator = 0.5 * (du * du + dd * dd);
                if !(denominator > 0.0) {
                    return Err(invalid(format!("degenerate price increment at node ({depth}, {j})")));
                }
                let raw = numerator / denominator;
                let v = raw.clamp(-bound, bound);
                // Deep in the money the ratio is 1 up to rounding; that is
                // not a binding constraint.
                if raw.abs() > bound * (1.0 + CLAMP_SLACK) {
                    clamp_events += 1;
                }
                level.push(v);
                next.push(0.5 * (wu + wd) - v * 0.5 * (du + dd));
            }
            holdings[depth] = level;
            residual = next;
        }
        Ok(Self {
            horizon: n,
            holdings,
            implied_premium: residual[0],
            clamp_events,
        })
    }

    /// v*_n at the node with `ups` up-moves.
    pub fn holding(&self, step: usize, ups: usize) -> f64 {
        self.holdings[step][ups]
    }
}

impl Policy for AnalyticHedge {
    fn decide(&self, d: &Decision<'_>) -> Vec<f64> {
        if d.step >= self.horizon {
            return vec![0.0];
        }
        let ups = d.history[..d.step].iter().filter(|s| s.sign > 0).count();
        vec![self.holding(d.step, ups)]
    }
}

/// Output of the premium estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CstarEstimate {
    /// argmin_c of the empirical E(c + X(T) − H)², the mean residual.
    pub c: f64,
    /// Empirical E(c + X(T) − H)² at the minimizer.
    pub mse: f64,
    pub std_error: f64,
    /// Per-path residuals H − X(T), each a single-path premium estimate.
    pub residuals: Vec<f64>,
}

/// Premium c^{k,*} minimizing the empirical quadratic hedging error of
/// `policy` over `n_mc` fresh skeleton paths.
pub fn estimate_cstar<P: Policy + ?Sized>(
    spec: &HedgingSpec,
    policy: &P,
    n_mc: usize,
    seed: u64,
) -> Result<CstarEstimate> {
    spec.validate()?;
    if n_mc < 2 {
        return Err(invalid("need at least two Monte Carlo paths"));
    }
    let skeleton = spec.skeleton()?;
    let model = spec.model(0.0)?;
    let n = skeleton.steps();
    let sampler = ExitTimeSampler::shared();
    let residuals = (0..n_mc as u64)
        .into_par_iter()
        .map(|id| {
            let mut rng = substream(seed, Purpose::Evaluation, id);
            let path = sample_skeleton_path(&skeleton, n, &sampler, &mut rng);
            let traj = simulate(&model, &path, spec.maturity, policy)?;
            let last = &traj.states[traj.terminal];
            Ok(model.claim(last[0]) - last[1])
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(summarize_residuals(residuals))
}

pub(crate) fn summarize_residuals(residuals: Vec<f64>) -> CstarEstimate {
    let count = residuals.len() as f64;
    let c = residuals.iter().sum::<f64>() / count;
    let sq: f64 = residuals.iter().map(|r| (c - r) * (c - r)).sum();
    let mse = sq / count;
    let std_error = (sq / (count - 1.0) / count).sqrt();
    CstarEstimate {
        c,
        mse,
        std_error,
        residuals,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Report {
    pub result_mean: f64,
    pub mean_square_error: f64,
    pub std_error: f64,
    pub true_value: f64,
    pub difference: f64,
    /// difference / true value.
    pub relative_error: f64,
    /// 100 · difference / true value.
    pub percent_error: f64,
    pub tree_price: f64,
    pub steps: usize,
    pub clamp_events: usize,
    pub k: u32,
    pub n_mc: usize,
    pub seed: u64,
    pub spec: HedgingSpec,
}

#[derive(Debug, Clone)]
pub struct Table1Run {
    pub report: Table1Report,
    /// Single-path premium estimates, in path order.
    pub replicates: Vec<f64>,
    pub runtime: Duration,
}

/// The hedging experiment: analytic hedge, premium estimate and its
/// comparison with the Black–Scholes price.
pub fn run_table1(spec: &HedgingSpec, seed: u64) -> Result<Table1Run> {
    let started = Instant::now();
    spec.validate()?;
    let hedge = AnalyticHedge::build(spec)?;
    let estimate = estimate_cstar(spec, &hedge, spec.n_mc, seed)?;
    let true_value = spec.true_price()?;
    let difference = (estimate.c - true_value).abs();
    let relative_error = difference / true_value;
    let report = Table1Report {
        result_mean: estimate.c,
        mean_square_error: estimate.mse,
        std_error: estimate.std_error,
        true_value,
        difference,
        relative_error,
        percent_error: 100.0 * relative_error,
        tree_price: binomial_call_price(spec)?,
        steps: hedge.horizon,
        clamp_events: hedge.clamp_events,
        k: spec.k,
        n_mc: spec.n_mc,
        seed,
        spec: *spec,
    };
    Ok(Table1Run {
        report,
        replicates: estimate.residuals,
        runtime: started.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::StepControl;

    #[test]
    fn bs_price_rejects_bad_input() {
        assert!(bs_call_price(0.0, 55.0, 0.2, 1.0).is_err());
        assert!(bs_call_price(49.0, 55.0, -0.2, 1.0).is_err());
        assert!(bs_call_price(49.0, 55.0, 0.2, f64::NAN).is_err());
    }

    #[test]
    fn bs_price_small_strike_limit() {
        let p = bs_call_price(49.0, 1e-8, 0.2, 1.0).unwrap();
        assert!((p - 49.0).abs() < 1e-5);
    }

    #[test]
    fn final_step_holding_is_delta_ratio() {
        let spec = HedgingSpec {
            k: 1,
            maturity: 0.5,
            control_bound: f64::INFINITY,
            ..Default::default()
        };
        let hedge = AnalyticHedge::build(&spec).unwrap();
        assert_eq!(hedge.horizon, 2);
        // One step from the end at the down node both children are out of
        // the money.
        assert_eq!(hedge.holding(1, 0), 0.0);
    }

    #[test]
    fn perfect_replication_gives_exact_premium() {
        let est = summarize_residuals(vec![1.75; 10]);
        assert_eq!(est.c, 1.75);
        assert_eq!(est.mse, 0.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn zero_policy_one_step_premium_is_zero() {
        let spec = HedgingSpec {
            k: 1,
            maturity: 0.25,
            n_mc: 100,
            ..Default::default()
        };
        let zero = StepControl::constant(0, 1, vec![0.0]);
        let est = estimate_cstar(&spec, &zero, 100, 3).unwrap();
        assert_eq!(est.c, 0.0);
        assert_eq!(est.mse, 0.0);
    }

    #[test]
    fn spec_validation() {
        assert!(HedgingSpec::default().validate().is_ok());
        let bad = HedgingSpec {
            sigma: 3.0,
            k: 1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
