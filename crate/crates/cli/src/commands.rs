//! The four experiments. Each returns its result record and the series it
//! wants written.

use serde::Serialize;
use skeleton_control::dp::{evaluate_policy, solve, Engine, StepDiagnostics};
use skeleton_control::exit_time::ExitTimeSampler;
use skeleton_control::hedging::{estimate_cstar, run_table1, AnalyticHedge};
use skeleton_control::skeleton::{chi, clock_deviation, sample_indexed_path, ChiEstimate};
use skeleton_control::stats::correlation;
use skeleton_control::{
    binomial_call_price, HedgingSpec, MeanEstimate, SkeletonParams, Table1Report, TimingMode,
};

use crate::config::Config;
use crate::error::{CliError, Context};
use crate::report::{Cell, Table};

#[derive(Debug, Serialize)]
pub struct StatsResults {
    pub params: SkeletonParams,
    pub steps_horizon: usize,
    pub chi: ChiEstimate,
    pub n_steps: usize,
    pub up_frequency: MeanEstimate,
    /// Share of steps in which each coordinate exits first.
    pub coordinate_frequencies: Vec<f64>,
    pub mean_wait: MeanEstimate,
    pub expected_mean_wait: f64,
    pub increment_mean: MeanEstimate,
    /// `None` when waits are deterministic.
    pub sign_wait_correlation: Option<f64>,
    /// Kolmogorov distance between rescaled waits and the exit-time law; d = 1
    /// with sampled waits only.
    pub exit_time_cdf_sup_distance: Option<f64>,
    /// E|T^k_{e(k,T)} − T| over `n_paths` paths.
    pub clock_deviation: MeanEstimate,
}

fn sup_distance(mut sample: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let f = cdf(t);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

pub fn skeleton_stats(cfg: &Config, seed: u64) -> Result<(StatsResults, Vec<Table>), CliError> {
    let s = &cfg.skeleton;
    let params = cfg.skeleton_params().context("skeleton parameters")?;
    let chi = chi(s.d, s.chi_samples, seed).context("estimating chi")?;
    let path = sample_indexed_path(&params, s.n_steps, seed, 0);
    let n = path.len();
    let ups: Vec<f64> = path.steps.iter().map(|st| f64::from(st.sign > 0)).collect();
    let waits: Vec<f64> = path.waiting_times().collect();
    let incs: Vec<f64> = path
        .steps
        .iter()
        .map(|st| f64::from(st.sign) * params.epsilon)
        .collect();
    let mut coords = vec![0usize; s.d];
    for st in &path.steps {
        coords[st.coord as usize] += 1;
    }
    let sampled = params.timing_mode == TimingMode::SampledWaitingTimes;
    let sign_wait_correlation = if sampled {
        correlation(&ups, &waits)
    } else {
        None
    };
    let exit_time_cdf_sup_distance = (sampled && s.d == 1).then(|| {
        let sampler = ExitTimeSampler::shared();
        let eps2 = params.epsilon * params.epsilon;
        sup_distance(waits.iter().map(|w| w / eps2).collect(), |t| sampler.cdf(t))
    });
    let results = StatsResults {
        steps_horizon: params.steps(),
        chi,
        n_steps: n,
        up_frequency: MeanEstimate::from_samples(&ups),
        coordinate_frequencies: coords.iter().map(|&c| c as f64 / n as f64).collect(),
        mean_wait: MeanEstimate::from_samples(&waits),
        expected_mean_wait: params.mean_wait(),
        increment_mean: MeanEstimate::from_samples(&incs),
        sign_wait_correlation,
        exit_time_cdf_sup_distance,
        clock_deviation: clock_deviation(&params, params.horizon, s.n_paths, seed)
            .context("clock deviation")?,
        params,
    };
    Ok((results, Vec::new()))
}

#[derive(Debug, Serialize)]
pub struct SolveResults {
    pub engine: Engine,
    pub steps: usize,
    pub grid_size: usize,
    pub v0: f64,
    /// Sampling error of V0 only; regression bias is not included.
    pub v0_std_error: f64,
    /// Mean reward of the computed policy on fresh paths.
    pub evaluation: Option<MeanEstimate>,
    pub diagnostics: Vec<StepDiagnostics>,
}

pub fn solve_model(cfg: &Config, seed: u64) -> Result<(SolveResults, Vec<Table>), CliError> {
    let skeleton = cfg.skeleton_params().context("skeleton parameters")?;
    let model = cfg.model().context("model")?;
    let dp = cfg.dp_config(seed).context("solver configuration")?;
    let policy = solve(&model, &skeleton, &dp).context("solving")?;
    let evaluation = match cfg.dp.eval_paths {
        0 => None,
        n => Some(
            evaluate_policy(&model, &skeleton, &policy.bind(&model), n, seed)
                .context("evaluating the policy")?,
        ),
    };
    let results = SolveResults {
        engine: dp.engine,
        steps: skeleton.steps(),
        grid_size: dp.grid.len(),
        v0: policy.v0(),
        v0_std_error: policy.v0_std_error(),
        evaluation,
        diagnostics: policy.diagnostics().to_vec(),
    };
    Ok((results, Vec::new()))
}

pub fn hedge_table1(cfg: &Config, seed: u64) -> Result<(Table1Report, Vec<Table>), CliError> {
    let run = run_table1(&cfg.hedging_spec(), seed).context("hedging experiment")?;
    let figure = Table {
        file: "figure1.csv",
        header: &["replicate_id", "c_estimate"],
        rows: run
            .replicates
            .iter()
            .enumerate()
            .map(|(i, &c)| vec![Cell::Int(i as u64), Cell::Float(c)])
            .collect(),
    };
    Ok((run.report, vec![figure]))
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesPoint {
    pub k: u32,
    pub metric: &'static str,
    pub estimate: f64,
    pub stderr: f64,
}

#[derive(Debug, Serialize)]
pub struct ConvergenceResults {
    pub points: Vec<SeriesPoint>,
    /// Whether E|T^k_{e(k,T)} − T| falls strictly from each level to the next.
    pub clock_deviation_decreasing: bool,
    pub tree_error_decreasing: bool,
}

fn level_points(cfg: &Config, k: u32, seed: u64) -> Result<Vec<SeriesPoint>, CliError> {
    let s = &cfg.skeleton;
    let params = SkeletonParams::new(k, s.d, s.horizon, TimingMode::SampledWaitingTimes)
        .context(format!("skeleton at level {k}"))?;
    let clock = clock_deviation(&params, s.horizon, cfg.convergence.n_paths, seed)
        .context(format!("clock deviation at level {k}"))?;
    let spec = HedgingSpec {
        k,
        n_mc: cfg.convergence.hedge_paths,
        ..cfg.hedging_spec()
    };
    let truth = spec.true_price().context("Black–Scholes price")?;
    let tree = binomial_call_price(&spec).context(format!("tree price at level {k}"))?;
    let hedge = AnalyticHedge::build(&spec).context(format!("hedge at level {k}"))?;
    let c = estimate_cstar(&spec, &hedge, spec.n_mc, seed).context(format!("premium at level {k}"))?;
    Ok(vec![
        SeriesPoint {
            k,
            metric: "clock_deviation",
            estimate: clock.mean,
            stderr: clock.std_error,
        },
        SeriesPoint {
            k,
            metric: "tree_price_error",
            estimate: (tree - truth).abs(),
            stderr: 0.0,
        },
        SeriesPoint {
            k,
            metric: "hedged_premium_error",
            estimate: (c.c - truth).abs(),
            stderr: c.std_error,
        },
    ])
}

fn decreasing(points: &[SeriesPoint], metric: &str) -> bool {
    let v: Vec<f64> = points
        .iter()
        .filter(|p| p.metric == metric)
        .map(|p| p.estimate)
        .collect();
    v.windows(2).all(|w| w[1] < w[0])
}

pub fn convergence(cfg: &Config, seed: u64) -> Result<(ConvergenceResults, Vec<Table>), CliError> {
    let c = &cfg.convergence;
    let levels: Vec<u32> = (c.k_min..=c.k_max).collect();
    // Levels run one after another; the parallelism is inside each of them.
    let mut points = Vec::new();
    for &k in &levels {
        points.extend(level_points(cfg, k, seed)?);
    }
    let table = Table {
        file: "convergence.csv",
        header: &["k", "metric", "estimate", "stderr"],
        rows: points
            .iter()
            .map(|p| {
                vec![
                    Cell::Int(u64::from(p.k)),
                    Cell::Text(p.metric),
                    Cell::Float(p.estimate),
                    Cell::Float(p.stderr),
                ]
            })
            .collect(),
    };
    let results = ConvergenceResults {
        clock_deviation_decreasing: decreasing(&points, "clock_deviation"),
        tree_error_decreasing: decreasing(&points, "tree_price_error"),
        points,
    };
    Ok((results, vec![table]))
}
