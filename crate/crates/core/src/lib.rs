//! Near-optimal control of path-dependent stochastic systems on the
//! discrete-type skeleton of Brownian motion.
//!
//! The skeleton replaces Brownian motion by a random walk that moves ±ε_k
//! along one coordinate at the exit times of the cube of half-width ε_k.
//! Controlled systems driven by it reduce to a finite-horizon Markov
//! decision problem, solved here by backward dynamic programming.

// `!(x > 0.0)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod dp;
pub mod error;
pub mod exit_time;
pub mod hedging;
pub mod model;
pub mod normal;
pub mod rng;
pub mod skeleton;
pub mod stats;

pub use control::{concat, grid_points, restrict, ActionCube, ActionGrid, StepControl};
pub use dp::{
    brute_force_value, evaluate_policy, solve, solve_exact_tree, solve_regression_mc, DpConfig,
    Engine, ValuePolicy,
};
pub use error::{Error, Result};
pub use exit_time::ExitTimeSampler;
pub use hedging::{
    binomial_call_price, bs_call_price, estimate_cstar, run_table1, AnalyticHedge, HedgingSpec,
    Table1Report,
};
pub use model::{
    simulate, ControlledModel, EulerSkeletonModel, GbmWealthModel, PayoffKind, PayoffSpec, Policy,
    State,
};
pub use skeleton::{
    chi, epsilon_schedule, sample_skeleton_path, steps_for_epsilon, SkeletonParams, SkeletonPath,
    Step, TimingMode,
};
pub use stats::MeanEstimate;

/// Version string embedded in every report.
pub const ARTIFACT_VERSION: &str = concat!("skeleton-control ", env!("CARGO_PKG_VERSION"));
