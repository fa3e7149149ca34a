//! Experiment configuration: a TOML file with one table per module.
//!
//! Every key has a default, so an empty file (or no file) is a valid
//! configuration. Unknown keys are rejected. After parsing, [`Config::resolve`]
//! fills in derived defaults (such as the premium) so that the resolved value
//! alone reproduces a run.

use std::path::Path;

use serde::{Deserialize, Serialize};
use skeleton_control::control::{grid_points, ActionCube, ActionGrid};
use skeleton_control::dp::{Continuation, DpConfig, Engine};
use skeleton_control::{
    bs_call_price, GbmWealthModel, HedgingSpec, PayoffSpec, SkeletonParams, TimingMode,
};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Used when neither `--seed` nor `SKELCTL_SEED` is given.
    pub seed: Option<u64>,
    pub skeleton: SkeletonSection,
    pub model: ModelSection,
    pub dp: DpSection,
    pub hedging: HedgingSection,
    pub convergence: ConvergenceSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkeletonSection {
    pub k: u32,
    /// Overrides the default level size 2^-k.
    pub epsilon: Option<f64>,
    pub d: usize,
    pub horizon: f64,
    pub timing_mode: TimingMode,
    /// Steps sampled by `skeleton-stats`.
    pub n_steps: usize,
    /// Paths for the clock-deviation estimate in `skeleton-stats`.
    pub n_paths: usize,
    /// Monte Carlo samples for χ_d when d ≥ 2.
    pub chi_samples: usize,
}

impl Default for SkeletonSection {
    fn default() -> Self {
        Self {
            k: 3,
            epsilon: None,
            d: 1,
            horizon: 1.0,
            timing_mode: TimingMode::SampledWaitingTimes,
            n_steps: 100_000,
            n_paths: 10_000,
            chi_samples: 200_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PayoffChoice {
    QuadraticHedging,
    PathDependent,
    Constant,
}

/// Price/wealth model used by `solve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub s0: f64,
    pub sigma: f64,
    pub mu: f64,
    pub strike: f64,
    pub payoff: PayoffChoice,
    /// Premium c in the hedging rewards; defaults to the Black–Scholes price
    /// over the skeleton horizon.
    pub premium: Option<f64>,
    /// Cap on the lookback claim of the path-dependent reward.
    pub cap: f64,
    /// Value of the constant reward.
    pub constant: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            s0: 49.0,
            sigma: 0.2,
            mu: 0.0,
            strike: 55.0,
            payoff: PayoffChoice::QuadraticHedging,
            premium: None,
            cap: 10.0,
            constant: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DpSection {
    pub engine: Engine,
    pub grid_points: usize,
    pub control_bound: f64,
    pub n_paths: usize,
    pub basis_degree: usize,
    pub continuation: Continuation,
    /// Fresh paths for evaluating the computed policy; 0 skips evaluation.
    pub eval_paths: usize,
}

impl Default for DpSection {
    fn default() -> Self {
        Self {
            engine: Engine::RegressionMc,
            grid_points: 11,
            control_bound: 1.0,
            n_paths: 20_000,
            basis_degree: 2,
            continuation: Continuation::SignAveraged,
            eval_paths: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HedgingSection {
    pub s0: f64,
    pub sigma: f64,
    pub mu: f64,
    pub strike: f64,
    pub maturity: f64,
    pub control_bound: f64,
    pub k: u32,
    pub n_mc: usize,
    pub timing_mode: TimingMode,
}

impl Default for HedgingSection {
    fn default() -> Self {
        let spec = HedgingSpec::default();
        Self {
            s0: spec.s0,
            sigma: spec.sigma,
            mu: spec.mu,
            strike: spec.strike,
            maturity: spec.maturity,
            control_bound: spec.control_bound,
            k: spec.k,
            n_mc: spec.n_mc,
            timing_mode: spec.timing_mode,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceSection {
    pub k_min: u32,
    pub k_max: u32,
    /// Paths per level for the clock deviation.
    pub n_paths: usize,
    /// Paths per level for the hedged premium.
    pub hedge_paths: usize,
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        Self {
            k_min: 2,
            k_max: 5,
            n_paths: 10_000,
            hedge_paths: 2_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    /// Series go to CSV files next to the report.
    #[default]
    Csv,
    /// Series are embedded in the report.
    Json,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub format: OutputFormat,
}

/// A semantic error tied to one key of the configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub section: &'static str,
    pub key: &'static str,
    pub message: String,
}

fn field(section: &'static str, key: &'static str, message: impl Into<String>) -> FieldError {
    FieldError {
        section,
        key,
        message: message.into(),
    }
}

fn positive(section: &'static str, key: &'static str, v: f64) -> Result<(), FieldError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(field(section, key, format!("must be positive and finite, got {v}")))
    }
}

fn at_least(section: &'static str, key: &'static str, v: usize, min: usize) -> Result<(), FieldError> {
    if v >= min {
        Ok(())
    } else {
        Err(field(section, key, format!("must be at least {min}, got {v}")))
    }
}

/// Highest level the sweeps and samplers accept; 4^12 steps per unit time is
/// already far beyond useful run times.
const MAX_LEVEL: u32 = 12;

impl Config {
    /// Parses TOML text; `origin` names the source in diagnostics.
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config {
            origin: origin.to_string(),
            message: e.to_string().trim_end().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<(Self, String), CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let config = Self::parse(&text, &path.display().to_string())?;
        Ok((config, text))
    }

    /// Checks every section against the library's preconditions.
    pub fn validate(&self) -> Result<(), FieldError> {
        let s = &self.skeleton;
        if s.k == 0 || s.k > MAX_LEVEL {
            return Err(field("skeleton", "k", format!("must lie in 1..={MAX_LEVEL}, got {}", s.k)));
        }
        if let Some(eps) = s.epsilon {
            positive("skeleton", "epsilon", eps)?;
        }
        at_least("skeleton", "d", s.d, 1)?;
        positive("skeleton", "horizon", s.horizon)?;
        at_least("skeleton", "n_steps", s.n_steps, 2)?;
        at_least("skeleton", "n_paths", s.n_paths, 2)?;
        at_least("skeleton", "chi_samples", s.chi_samples, 2)?;
        self.skeleton_params()
            .map_err(|e| field("skeleton", "k", e.to_string()))?;

        let m = &self.model;
        positive("model", "s0", m.s0)?;
        positive("model", "sigma", m.sigma)?;
        positive("model", "strike", m.strike)?;
        if !m.mu.is_finite() {
            return Err(field("model", "mu", "must be finite"));
        }
        if let Some(c) = m.premium {
            if !c.is_finite() {
                return Err(field("model", "premium", "must be finite"));
            }
        }
        positive("model", "cap", m.cap)?;
        if !m.constant.is_finite() {
            return Err(field("model", "constant", "must be finite"));
        }

        let dp = &self.dp;
        at_least("dp", "grid_points", dp.grid_points, 2)?;
        positive("dp", "control_bound", dp.control_bound)?;
        if dp.basis_degree > 4 {
            return Err(field("dp", "basis_degree", format!("must be at most 4, got {}", dp.basis_degree)));
        }
        if dp.engine == Engine::RegressionMc {
            at_least("dp", "n_paths", dp.n_paths, 2)?;
        }
        if dp.eval_paths == 1 {
            return Err(field("dp", "eval_paths", "must be 0 or at least 2"));
        }
        self.action_grid()
            .map_err(|e| field("dp", "grid_points", e.to_string()))?;

        let h = &self.hedging;
        if h.k == 0 || h.k > MAX_LEVEL {
            return Err(field("hedging", "k", format!("must lie in 1..={MAX_LEVEL}, got {}", h.k)));
        }
        positive("hedging", "control_bound", h.control_bound)?;
        at_least("hedging", "n_mc", h.n_mc, 2)?;
        self.hedging_spec()
            .validate()
            .map_err(|e| field("hedging", "sigma", e.to_string()))?;

        let c = &self.convergence;
        if c.k_min == 0 || c.k_min > MAX_LEVEL {
            return Err(field("convergence", "k_min", format!("must lie in 1..={MAX_LEVEL}, got {}", c.k_min)));
        }
        if c.k_max < c.k_min || c.k_max > MAX_LEVEL {
            return Err(field(
                "convergence",
                "k_max",
                format!("must lie in {}..={MAX_LEVEL}, got {}", c.k_min, c.k_max),
            ));
        }
        at_least("convergence", "n_paths", c.n_paths, 2)?;
        at_least("convergence", "hedge_paths", c.hedge_paths, 2)?;
        for k in c.k_min..=c.k_max {
            HedgingSpec {
                k,
                n_mc: c.hedge_paths,
                ..self.hedging_spec()
            }
            .validate()
            .map_err(|e| field("convergence", "k_min", format!("level {k}: {e}")))?;
        }
        Ok(())
    }

    /// Materializes derived defaults.
    pub fn resolve(mut self) -> Self {
        if self.model.premium.is_none() {
            let m = &self.model;
            self.model.premium = bs_call_price(m.s0, m.strike, m.sigma, self.skeleton.horizon).ok();
        }
        self
    }

    pub fn skeleton_params(&self) -> skeleton_control::Result<SkeletonParams> {
        let s = &self.skeleton;
        let p = SkeletonParams::new(s.k, s.d, s.horizon, s.timing_mode)?;
        match s.epsilon {
            Some(eps) => p.with_epsilon(eps),
            None => Ok(p),
        }
    }

    pub fn action_grid(&self) -> skeleton_control::Result<ActionGrid> {
        grid_points(ActionCube::new(1, self.dp.control_bound)?, self.dp.grid_points)
    }

    pub fn payoff(&self) -> PayoffSpec {
        let m = &self.model;
        let premium = m.premium.unwrap_or(0.0);
        match m.payoff {
            PayoffChoice::QuadraticHedging => PayoffSpec::quadratic_hedging(premium),
            PayoffChoice::PathDependent => PayoffSpec::path_dependent(premium, m.cap),
            PayoffChoice::Constant => PayoffSpec::constant(m.constant),
        }
    }

    pub fn model(&self) -> skeleton_control::Result<GbmWealthModel> {
        let m = &self.model;
        GbmWealthModel::new(m.s0, m.sigma, m.mu, m.strike, self.payoff())
    }

    pub fn dp_config(&self, seed: u64) -> skeleton_control::Result<DpConfig> {
        let grid = self.action_grid()?;
        let dp = &self.dp;
        let mut cfg = match dp.engine {
            Engine::ExactTree => DpConfig::exact_tree(grid),
            Engine::RegressionMc => DpConfig::regression(grid, dp.n_paths, dp.basis_degree, seed),
        };
        cfg.basis_degree = dp.basis_degree;
        cfg.continuation = dp.continuation;
        Ok(cfg)
    }

    pub fn hedging_spec(&self) -> HedgingSpec {
        let h = &self.hedging;
        HedgingSpec {
            s0: h.s0,
            sigma: h.sigma,
            mu: h.mu,
            strike: h.strike,
            maturity: h.maturity,
            control_bound: h.control_bound,
            k: h.k,
            n_mc: h.n_mc,
            timing_mode: h.timing_mode,
        }
    }
}

/// Line of `key` inside `[section]` of the TOML source, 1-based.
pub fn locate_key(source: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, line) in source.lines().enumerate() {
        let t = line.trim();
        if let Some(header) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            current = header.trim().to_string();
            continue;
        }
        let Some((lhs, _)) = t.split_once('=') else {
            continue;
        };
        let lhs = lhs.trim().trim_matches('"');
        let dotted = format!("{section}.{key}");
        if (current == section && lhs == key) || (current.is_empty() && lhs == dotted) {
            return Some(i + 1);
        }
    }
    None
}
