//! Python bindings: the skeleton sampler, the hedging experiment and the DP
//! solver on the price/wealth model.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use skeleton_control::dp::{evaluate_policy, solve, DpConfig};
use skeleton_control::skeleton::{clock_deviation as clock_dev, sample_indexed_path, steps_horizon as e};
use skeleton_control::{
    grid_points, ActionCube, Error, GbmWealthModel, HedgingSpec, PayoffSpec, SkeletonParams,
    TimingMode,
};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter(_) | Error::InvalidComposition(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn timing(sampled: bool) -> TimingMode {
    if sampled {
        TimingMode::SampledWaitingTimes
    } else {
        TimingMode::DeterministicStepCount
    }
}

/// Black–Scholes call price with zero interest rate.
#[pyfunction]
fn bs_call_price(s0: f64, strike: f64, sigma: f64, maturity: f64) -> PyResult<f64> {
    skeleton_control::bs_call_price(s0, strike, sigma, maturity).map_err(to_py)
}

#[pyfunction]
fn epsilon_schedule(k: u32) -> PyResult<f64> {
    skeleton_control::epsilon_schedule(k).map_err(to_py)
}

/// e(k, t) = ceil(t / (eps_k^2 chi_d)).
#[pyfunction]
#[pyo3(signature = (k, t, chi_d = 1.0))]
fn steps_horizon(k: u32, t: f64, chi_d: f64) -> PyResult<usize> {
    e(k, t, chi_d).map_err(to_py)
}

/// (estimate, 95% half-width) of chi_d; exact for d = 1.
#[pyfunction]
#[pyo3(signature = (d, mc_samples = 200_000, seed = 0))]
fn chi(d: usize, mc_samples: usize, seed: u64) -> PyResult<(f64, f64)> {
    let c = skeleton_control::chi(d, mc_samples, seed).map_err(to_py)?;
    Ok((c.value, c.half_width))
}

/// One skeleton path as a dict of per-step lists.
#[pyfunction]
#[pyo3(signature = (k, n_steps, seed = 0, d = 1, horizon = 1.0, sampled = true, path_id = 0))]
#[allow(clippy::too_many_arguments)]
fn sample_path<'py>(
    py: Python<'py>,
    k: u32,
    n_steps: usize,
    seed: u64,
    d: usize,
    horizon: f64,
    sampled: bool,
    path_id: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let params = SkeletonParams::new(k, d, horizon, timing(sampled)).map_err(to_py)?;
    let path = sample_indexed_path(&params, n_steps, seed, path_id);
    let out = PyDict::new(py);
    out.set_item("epsilon", path.epsilon)?;
    out.set_item("signs", path.steps.iter().map(|s| s.sign).collect::<Vec<_>>())?;
    out.set_item("coords", path.steps.iter().map(|s| s.coord).collect::<Vec<_>>())?;
    out.set_item("waiting_times", path.waiting_times().collect::<Vec<_>>())?;
    out.set_item("stop_times", path.stop_times)?;
    Ok(out)
}

/// (mean, standard error) of |T^k_{e(k,t)} - t| over `n_paths` paths.
#[pyfunction]
#[pyo3(signature = (k, t = 1.0, n_paths = 10_000, seed = 0))]
fn clock_deviation(k: u32, t: f64, n_paths: usize, seed: u64) -> PyResult<(f64, f64)> {
    let params = SkeletonParams::new(k, 1, t, TimingMode::SampledWaitingTimes).map_err(to_py)?;
    let est = clock_dev(&params, t, n_paths, seed).map_err(to_py)?;
    Ok((est.mean, est.std_error))
}

#[allow(clippy::too_many_arguments)]
fn hedging_spec(
    k: u32,
    n_mc: usize,
    s0: f64,
    strike: f64,
    sigma: f64,
    maturity: f64,
    control_bound: f64,
    sampled: bool,
) -> HedgingSpec {
    HedgingSpec {
        s0,
        sigma,
        strike,
        maturity,
        control_bound,
        k,
        n_mc,
        timing_mode: timing(sampled),
        ..Default::default()
    }
}

/// Call price on the skeleton's binomial tree.
#[pyfunction]
#[pyo3(signature = (k, s0 = 49.0, strike = 55.0, sigma = 0.2, maturity = 1.0))]
fn binomial_call_price(k: u32, s0: f64, strike: f64, sigma: f64, maturity: f64) -> PyResult<f64> {
    let spec = hedging_spec(k, 2, s0, strike, sigma, maturity, 1.0, false);
    skeleton_control::binomial_call_price(&spec).map_err(to_py)
}

/// The hedging experiment; returns the report fields plus the per-path
/// premium estimates under "replicates".
#[pyfunction]
#[pyo3(signature = (
    k = 3, n_mc = 20_000, seed = 0, s0 = 49.0, strike = 55.0, sigma = 0.2,
    maturity = 1.0, control_bound = 1.0, sampled = false
))]
#[allow(clippy::too_many_arguments)]
fn run_table1<'py>(
    py: Python<'py>,
    k: u32,
    n_mc: usize,
    seed: u64,
    s0: f64,
    strike: f64,
    sigma: f64,
    maturity: f64,
    control_bound: f64,
    sampled: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = hedging_spec(k, n_mc, s0, strike, sigma, maturity, control_bound, sampled);
    let run = py
        .detach(|| skeleton_control::run_table1(&spec, seed))
        .map_err(to_py)?;
    let r = &run.report;
    let out = PyDict::new(py);
    out.set_item("result_mean", r.result_mean)?;
    out.set_item("mean_square_error", r.mean_square_error)?;
    out.set_item("std_error", r.std_error)?;
    out.set_item("true_value", r.true_value)?;
    out.set_item("difference", r.difference)?;
    out.set_item("relative_error", r.relative_error)?;
    out.set_item("percent_error", r.percent_error)?;
    out.set_item("tree_price", r.tree_price)?;
    out.set_item("steps", r.steps)?;
    out.set_item("clamp_events", r.clamp_events)?;
    out.set_item("runtime_seconds", run.runtime.as_secs_f64())?;
    out.set_item("replicates", run.replicates)?;
    Ok(out)
}

/// Solves the quadratic-hedging control problem with premium `premium`
/// (Black–Scholes price when omitted) and evaluates the policy on fresh
/// paths. Returns a dict with v0, v0_std_error, evaluated and evaluated_se.
#[pyfunction]
#[pyo3(signature = (
    k = 2, horizon = 1.0, premium = None, engine = "regression-mc", grid_points = 11,
    n_paths = 20_000, basis_degree = 2, eval_paths = 20_000, seed = 0, sampled = false
))]
#[allow(clippy::too_many_arguments)]
fn solve_hedging<'py>(
    py: Python<'py>,
    k: u32,
    horizon: f64,
    premium: Option<f64>,
    engine: &str,
    grid_points: usize,
    n_paths: usize,
    basis_degree: usize,
    eval_paths: usize,
    seed: u64,
    sampled: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let premium = match premium {
        Some(c) => c,
        None => bs_call_price(49.0, 55.0, 0.2, horizon)?,
    };
    let model = GbmWealthModel::new(49.0, 0.2, 0.0, 55.0, PayoffSpec::quadratic_hedging(premium))
        .map_err(to_py)?;
    let skeleton = SkeletonParams::new(k, 1, horizon, timing(sampled)).map_err(to_py)?;
    let grid = grid_points_1d(grid_points)?;
    let cfg = match engine {
        "exact-tree" => DpConfig::exact_tree(grid),
        "regression-mc" => DpConfig::regression(grid, n_paths, basis_degree, seed),
        other => return Err(PyValueError::new_err(format!("unknown engine {other:?}"))),
    };
    let (policy, eval) = py
        .detach(|| {
            let policy = solve(&model, &skeleton, &cfg)?;
            let eval = evaluate_policy(&model, &skeleton, &policy.bind(&model), eval_paths, seed)?;
            Ok((policy, eval))
        })
        .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("steps", skeleton.steps())?;
    out.set_item("v0", policy.v0())?;
    out.set_item("v0_std_error", policy.v0_std_error())?;
    out.set_item("evaluated", eval.mean)?;
    out.set_item("evaluated_se", eval.std_error)?;
    Ok(out)
}

fn grid_points_1d(m: usize) -> PyResult<skeleton_control::ActionGrid> {
    let cube = ActionCube::new(1, 1.0).map_err(to_py)?;
    grid_points(cube, m).map_err(to_py)
}

#[pymodule]
#[pyo3(name = "skeleton_control")]
fn skeleton_control_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(bs_call_price, m)?)?;
    m.add_function(wrap_pyfunction!(epsilon_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(steps_horizon, m)?)?;
    m.add_function(wrap_pyfunction!(chi, m)?)?;
    m.add_function(wrap_pyfunction!(sample_path, m)?)?;
    m.add_function(wrap_pyfunction!(clock_deviation, m)?)?;
    m.add_function(wrap_pyfunction!(binomial_call_price, m)?)?;
    m.add_function(wrap_pyfunction!(run_table1, m)?)?;
    m.add_function(wrap_pyfunction!(solve_hedging, m)?)?;
    Ok(())
}
