//! Seeded multi-trial experiments.
//!
//! A trial with index `i` uses seed `base_seed + i` for both its ground-truth
//! initial condition and its reservoir, so two cells of a sweep that share a
//! trial index see identical data and (where the reservoir configuration is
//! shared) identical reservoirs. Trials run on a worker pool and are gathered
//! back into fixed positions, so worker count never changes the output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::esn::{build_reservoir, collect_states, forecast, one_step_benchmark, ReadoutModel, Reservoir, ReservoirConfig};
use crate::lorenz::{attractor_warmup, grid_len, integrate, LorenzParams, Method, SolverSpec, StateVec, Trajectory};
use crate::metrics::{
    error_series_with_variance, estimate_vpt_from_initial_error, log_error_slope_in, normalized_error_series, trajectory_variance, vgtt_pairs, vpt,
    ErrorSeries, LogScale, VptResult, DEFAULT_SLOPE_WINDOW,
};
use crate::numerics::{RidgeFactorization, DEFAULT_RCOND};
use crate::{DEFAULT_VPT_THRESHOLD, LORENZ_LYAPUNOV_EXPONENT};

/// RNG stream for initial-condition jitter; reservoirs use the default stream.
const DATA_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSettings {
    pub threshold: f64,
    pub lyapunov_exponent: f64,
    /// `(e_low, e_high)` for the log-error slope fit.
    pub slope_window: (f64, f64),
    /// Logarithm for the reported slopes. Decimal matches slopes read off a
    /// log-scale error plot; the squared error grows at twice the exponent
    /// in natural-log units.
    pub slope_scale: LogScale,
    /// Prediction step whose error feeds the early VPT estimate (1-based).
    pub early_step: usize,
    /// Growth rate assumed by the early estimate.
    pub early_slope: f64,
}

impl Default for MetricSettings {
    fn default() -> Self {
        MetricSettings {
            threshold: DEFAULT_VPT_THRESHOLD,
            lyapunov_exponent: LORENZ_LYAPUNOV_EXPONENT,
            slope_window: DEFAULT_SLOPE_WINDOW,
            slope_scale: LogScale::Decimal,
            early_step: 5,
            early_slope: LORENZ_LYAPUNOV_EXPONENT,
        }
    }
}

/// Everything that determines a trial apart from its index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentProfile {
    pub name: String,
    pub lorenz: LorenzParams,
    pub solver: SolverSpec,
    /// Nominal initial condition before warmup.
    pub initial_state: StateVec,
    /// Each trial adds a uniform offset in `[-jitter, jitter]` per coordinate.
    pub initial_jitter: f64,
    pub warmup_time: f64,
    pub train_time: f64,
    pub predict_time: f64,
    pub reservoir: ReservoirConfig,
    pub lambda: f64,
    /// Singular-value cutoff for the unregularized readout solve.
    pub rcond: f64,
    pub base_seed: u64,
    pub metrics: MetricSettings,
}

impl ExperimentProfile {
    /// Long-run profile: dt 1e-3, 5000 time units of training, 1250 of prediction.
    pub fn paper() -> Self {
        ExperimentProfile {
            name: "paper".into(),
            lorenz: LorenzParams::default(),
            solver: SolverSpec::new(Method::Abm54Pc, 1e-3),
            initial_state: StateVec::new(1.0, 0.0, 0.0),
            initial_jitter: 0.0,
            warmup_time: 20.0,
            train_time: 5000.0,
            predict_time: 1250.0,
            reservoir: ReservoirConfig::default(),
            lambda: 0.0,
            rcond: DEFAULT_RCOND,
            base_seed: 0,
            metrics: MetricSettings::default(),
        }
    }

    /// Desk-scale profile: dt 1e-2, 250 time units of training, 60 Lyapunov times of prediction.
    pub fn desk() -> Self {
        ExperimentProfile {
            name: "desk".into(),
            solver: SolverSpec::new(Method::Abm54Pc, 1e-2),
            train_time: 250.0,
            predict_time: 60.0 / LORENZ_LYAPUNOV_EXPONENT,
            ..Self::paper()
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "paper" => Some(Self::paper()),
            "desk" => Some(Self::desk()),
            _ => None,
        }
    }

    pub fn dt(&self) -> f64 {
        self.solver.dt
    }

    pub fn train_samples(&self) -> usize {
        grid_len(self.train_time, self.dt())
    }

    pub fn predict_steps(&self) -> usize {
        (self.predict_time / self.dt()).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        self.lorenz.validate()?;
        self.solver.validate()?;
        self.reservoir.validate()?;
        if !self.initial_state.is_finite() {
            return bad("initial_state must be finite".into());
        }
        if !(self.initial_jitter >= 0.0) {
            return bad("initial_jitter must be >= 0".into());
        }
        if !(self.warmup_time >= 0.0) {
            return bad("warmup_time must be >= 0".into());
        }
        if !(self.train_time > self.reservoir.washout_steps as f64 * self.dt()) {
            return bad(format!(
                "train_time ({}) must exceed reservoir.washout_steps * dt ({})",
                self.train_time,
                self.reservoir.washout_steps as f64 * self.dt()
            ));
        }
        if !(self.predict_time > 0.0) || self.predict_steps() == 0 {
            return bad("predict_time must cover at least one step".into());
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be >= 0".into());
        }
        if !(self.rcond >= 0.0) {
            return bad("rcond must be >= 0".into());
        }
        let m = &self.metrics;
        if !(m.threshold > 0.0 && m.lyapunov_exponent > 0.0 && m.early_slope > 0.0) {
            return bad("metrics.threshold, lyapunov_exponent and early_slope must be > 0".into());
        }
        if !(m.slope_window.0 < m.slope_window.1) {
            return bad("metrics.slope_window must be an increasing pair".into());
        }
        if m.early_step == 0 || m.early_step > self.predict_steps() {
            return bad("metrics.early_step must lie within the prediction".into());
        }
        Ok(())
    }

    pub fn trial_seed(&self, trial_index: usize) -> u64 {
        self.base_seed.wrapping_add(trial_index as u64)
    }
}

/// Ground truth for one trial.
#[derive(Debug, Clone)]
pub struct TrialData {
    /// Training inputs, `t0 = 0`.
    pub train: Trajectory,
    /// Samples following the training segment; sample `k` at `(k + 1) * dt`.
    pub test: Trajectory,
    /// Variance of `test`, the normalizer for every error series of the trial.
    pub variance: f64,
}

pub fn trial_data(profile: &ExperimentProfile, seed: u64) -> Result<TrialData> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(DATA_STREAM);
    let j = profile.initial_jitter;
    let mut s0 = profile.initial_state;
    if j > 0.0 {
        for d in 0..3 {
            s0.0[d] += rng.random_range(-j..=j);
        }
    }
    let warm = attractor_warmup(&profile.lorenz, s0, &profile.solver, profile.warmup_time)?;
    let n_train = profile.train_samples();
    let steps = profile.predict_steps();
    let dt = profile.dt();
    let full = integrate(&profile.lorenz, warm, &profile.solver, (n_train - 1 + steps) as f64 * dt)?;
    debug_assert_eq!(full.len(), n_train + steps);
    let train = full.slice(0, n_train);
    let test = full.slice(n_train, n_train + steps).with_t0(dt);
    let variance = trajectory_variance(&test);
    if variance == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(TrialData {
        train,
        test,
        variance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial_index: usize,
    pub seed: u64,
    pub lambda: f64,
    /// Lyapunov times.
    pub vpt_rc: f64,
    /// Lyapunov times.
    pub vpt_benchmark: f64,
    pub slope_rc: Option<f64>,
    pub slope_benchmark: Option<f64>,
    /// Normalized error at the early step.
    pub early_error: f64,
    /// Lyapunov times.
    pub early_estimate: Option<f64>,
    pub diverged: bool,
    pub exceeds_vgtt: bool,
}

impl TrialResult {
    pub fn ratio(&self) -> Option<f64> {
        (self.vpt_benchmark > 0.0).then(|| self.vpt_rc / self.vpt_benchmark)
    }

    fn failed(trial_index: usize, seed: u64, lambda: f64) -> Self {
        TrialResult {
            trial_index,
            seed,
            lambda,
            vpt_rc: 0.0,
            vpt_benchmark: 0.0,
            slope_rc: None,
            slope_benchmark: None,
            early_error: f64::INFINITY,
            early_estimate: None,
            diverged: true,
            exceeds_vgtt: false,
        }
    }
}

/// Full error curves of one evaluated trial.
#[derive(Debug, Clone)]
pub struct TrialTrace {
    pub result: TrialResult,
    pub prediction: Trajectory,
    pub benchmark: Option<Trajectory>,
    pub error_rc: ErrorSeries,
    pub error_benchmark: ErrorSeries,
    pub vpt_rc: VptResult,
    pub vpt_benchmark: VptResult,
}

/// A reservoir after teacher forcing, with its factorized readout problem.
pub struct TrainedTrial {
    pub trial_index: usize,
    pub seed: u64,
    pub data: TrialData,
    pub reservoir: Reservoir,
    pub factorization: RidgeFactorization,
}

impl TrainedTrial {
    /// Last training sample, the first closed-loop input.
    pub fn z0(&self) -> StateVec {
        *self.data.train.last().expect("non-empty training data")
    }

    pub fn model(&self, lambda: f64) -> Result<ReadoutModel> {
        ReadoutModel::from_factorization(&self.factorization, lambda)
    }
}

/// Data, reservoir, teacher forcing and factorization for one trial index.
/// `Ok(None)` means the reservoir blew up during teacher forcing.
pub fn train_trial(
    profile: &ExperimentProfile,
    reservoir: &ReservoirConfig,
    trial_index: usize,
) -> Result<Option<TrainedTrial>> {
    let seed = profile.trial_seed(trial_index);
    let data = trial_data(profile, seed)?;
    let cfg = ReservoirConfig { seed, ..*reservoir };
    let mut res = build_reservoir(&cfg)?;
    let (states, targets) = match collect_states(&mut res, &data.train, cfg.washout_steps) {
        Ok(st) => st,
        Err(Error::NonfiniteState { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let factorization = match RidgeFactorization::new(&states, &targets, profile.rcond) {
        Ok(f) => f,
        Err(Error::NoConvergence) => return Ok(None),
        Err(e) => return Err(e),
    };
    Ok(Some(TrainedTrial {
        trial_index,
        seed,
        data,
        reservoir: res,
        factorization,
    }))
}

/// Closed-loop prediction, benchmark and metrics for one readout.
pub fn evaluate_trial(profile: &ExperimentProfile, trained: &TrainedTrial, lambda: f64) -> Result<TrialTrace> {
    let m = &profile.metrics;
    let data = &trained.data;
    let steps = data.test.len();
    let dt = profile.dt();
    let z0 = trained.z0();
    let model = match trained.model(lambda) {
        Ok(model) => model,
        Err(Error::NoConvergence) => {
            return Ok(failed_trace(profile, trained, lambda));
        }
        Err(e) => return Err(e),
    };

    let fc = forecast(&mut trained.reservoir.clone(), &model, z0, steps, dt);
    let error_rc = error_series_with_variance(&data.test, &fc.trajectory.states, data.variance);
    let benchmark = one_step_benchmark(
        &trained.reservoir,
        &model,
        z0,
        &profile.lorenz,
        &profile.solver,
        (steps - 1) as f64 * dt,
    )
    .ok();
    let error_benchmark = match &benchmark {
        Some(b) => error_series_with_variance(&data.test, &b.states, data.variance),
        None => ErrorSeries::new(dt, dt, vec![f64::INFINITY; steps]),
    };
    let vpt_rc = vpt(&error_rc, m.threshold, m.lyapunov_exponent);
    let vpt_benchmark = vpt(&error_benchmark, m.threshold, m.lyapunov_exponent);
    let (lo, hi) = m.slope_window;
    let slope_rc = log_error_slope_in(&error_rc, lo, hi, m.slope_scale).ok().map(|f| f.slope);
    let slope_benchmark = log_error_slope_in(&error_benchmark, lo, hi, m.slope_scale).ok().map(|f| f.slope);

    let k = m.early_step - 1;
    let early_error = error_rc.values[k];
    let early_estimate = match estimate_vpt_from_initial_error(
        early_error,
        error_rc.time(k),
        m.early_slope,
        m.threshold,
        m.lyapunov_exponent,
    ) {
        Ok(v) => Some(v),
        // crossing already observed within the early window
        Err(Error::AlreadyExceeded { .. }) => Some(vpt_rc.vpt_lyap),
        Err(_) => None,
    };

    let result = TrialResult {
        trial_index: trained.trial_index,
        seed: trained.seed,
        lambda,
        vpt_rc: vpt_rc.vpt_lyap,
        vpt_benchmark: vpt_benchmark.vpt_lyap,
        slope_rc,
        slope_benchmark,
        early_error,
        early_estimate,
        diverged: fc.diverged,
        exceeds_vgtt: false,
    };
    Ok(TrialTrace {
        result,
        prediction: fc.trajectory,
        benchmark,
        error_rc,
        error_benchmark,
        vpt_rc,
        vpt_benchmark,
    })
}

fn failed_trace(profile: &ExperimentProfile, trained: &TrainedTrial, lambda: f64) -> TrialTrace {
    let dt = profile.dt();
    let steps = trained.data.test.len();
    let inf = ErrorSeries::new(dt, dt, vec![f64::INFINITY; steps]);
    let v = vpt(&inf, profile.metrics.threshold, profile.metrics.lyapunov_exponent);
    TrialTrace {
        result: TrialResult::failed(trained.trial_index, trained.seed, lambda),
        prediction: Trajectory::new(dt, dt, Vec::new()),
        benchmark: None,
        error_rc: inf.clone(),
        error_benchmark: inf,
        vpt_rc: v,
        vpt_benchmark: v,
    }
}

/// One trial per regularization value, all sharing the trial's data and reservoir.
fn run_trial_lambdas(
    profile: &ExperimentProfile,
    reservoir: &ReservoirConfig,
    trial_index: usize,
    lambdas: &[f64],
) -> Result<Vec<TrialResult>> {
    let seed = profile.trial_seed(trial_index);
    match train_trial(profile, reservoir, trial_index)? {
        None => Ok(lambdas.iter().map(|&l| TrialResult::failed(trial_index, seed, l)).collect()),
        Some(trained) => lambdas
            .iter()
            .map(|&l| evaluate_trial(profile, &trained, l).map(|t| t.result))
            .collect(),
    }
}

/// The full pipeline for `profile` at trial `trial_index`.
pub fn run_trial(profile: &ExperimentProfile, trial_index: usize) -> Result<TrialResult> {
    profile.validate()?;
    let mut out = run_trial_lambdas(profile, &profile.reservoir, trial_index, &[profile.lambda])?;
    Ok(out.remove(0))
}

/// Like [`run_trial`] but keeps the prediction and error curves.
pub fn trace_trial(profile: &ExperimentProfile, trial_index: usize) -> Result<Option<TrialTrace>> {
    profile.validate()?;
    match train_trial(profile, &profile.reservoir, trial_index)? {
        None => Ok(None),
        Some(trained) => evaluate_trial(profile, &trained, profile.lambda).map(Some),
    }
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Solver-agreement audit: the three integrators from one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VgttAudit {
    pub result: VptResult,
    pub pairs: Vec<NamedPair>,
    pub dt: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedPair {
    pub first: Method,
    pub second: Method,
    pub forward: VptResult,
    pub backward: VptResult,
    /// Earliest of the two orientations, Lyapunov times.
    pub vpt_lyap: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn run_vgtt_audit(
    lorenz: &LorenzParams,
    s0: StateVec,
    dt: f64,
    abs_tol: f64,
    rel_tol: f64,
    horizon: f64,
    threshold: f64,
    lyap: f64,
) -> Result<VgttAudit> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidConfig(format!("audit horizon must be > 0, got {horizon}")));
    }
    let trajs = Method::ALL
        .iter()
        .map(|&m| integrate(lorenz, s0, &SolverSpec::new(m, dt).with_tolerances(abs_tol, rel_tol), horizon))
        .collect::<Result<Vec<_>>>()?;
    let (result, pairs) = vgtt_pairs(&trajs, threshold, lyap)?;
    let pairs = pairs
        .into_iter()
        .map(|p| NamedPair {
            first: Method::ALL[p.first],
            second: Method::ALL[p.second],
            forward: p.forward,
            backward: p.backward,
            vpt_lyap: p.earliest().vpt_lyap,
        })
        .collect();
    Ok(VgttAudit {
        result,
        pairs,
        dt,
        abs_tol,
        rel_tol,
        horizon,
    })
}

/// Audit for a profile's own solver settings over its prediction horizon,
/// started from the warmed-up nominal initial condition.
pub fn profile_vgtt(profile: &ExperimentProfile) -> Result<VgttAudit> {
    let s0 = attractor_warmup(&profile.lorenz, profile.initial_state, &profile.solver, profile.warmup_time)?;
    run_vgtt_audit(
        &profile.lorenz,
        s0,
        profile.dt(),
        profile.solver.abs_tol,
        profile.solver.rel_tol,
        profile.predict_time,
        profile.metrics.threshold,
        profile.metrics.lyapunov_exponent,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Lambda,
    RadiusSize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell_id: usize,
    /// One value per axis, in axis order.
    pub coords: Vec<f64>,
    pub trials: usize,
    pub mean_vpt_rc: f64,
    pub std_vpt_rc: f64,
    pub mean_vpt_benchmark: f64,
    pub std_vpt_benchmark: f64,
    /// `mean_vpt_rc / mean_vpt_benchmark`.
    pub ratio: Option<f64>,
    pub diverged_fraction: f64,
    pub exceeds_vgtt_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub summary: CellSummary,
    pub trials: Vec<TrialResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub axes: Vec<SweepAxis>,
    pub trials_per_cell: usize,
    pub cells: Vec<SweepCell>,
    /// Solver agreement bound used for the `exceeds_vgtt` flags.
    pub vgtt: VptResult,
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Aggregate a cell. A cell whose every trial diverged reports zero means.
pub fn summarize_cell(cell_id: usize, coords: Vec<f64>, trials: &[TrialResult]) -> CellSummary {
    let rc: Vec<f64> = trials.iter().map(|t| t.vpt_rc).collect();
    let bm: Vec<f64> = trials.iter().map(|t| t.vpt_benchmark).collect();
    let (mut mean_rc, std_rc) = mean_std(&rc);
    let (mean_bm, std_bm) = mean_std(&bm);
    let diverged = trials.iter().filter(|t| t.diverged).count();
    if !trials.is_empty() && diverged == trials.len() {
        mean_rc = 0.0;
    }
    CellSummary {
        cell_id,
        coords,
        trials: trials.len(),
        mean_vpt_rc: mean_rc,
        std_vpt_rc: std_rc,
        mean_vpt_benchmark: mean_bm,
        std_vpt_benchmark: std_bm,
        ratio: (mean_bm > 0.0).then(|| mean_rc / mean_bm),
        diverged_fraction: if trials.is_empty() { 0.0 } else { diverged as f64 / trials.len() as f64 },
        exceeds_vgtt_count: trials.iter().filter(|t| t.exceeds_vgtt).count(),
    }
}

fn flag_vgtt(trials: &mut [TrialResult], vgtt: &VptResult) {
    if vgtt.crossed {
        for t in trials {
            t.exceeds_vgtt = t.vpt_rc > vgtt.vpt_lyap;
        }
    }
}

/// Regularization sweep with paired seeds: trial `i` of every cell shares
/// data and reservoir, only the readout differs.
pub fn run_lambda_sweep(
    profile: &ExperimentProfile,
    lambdas: &[f64],
    trials_per_cell: usize,
    workers: usize,
) -> Result<SweepResult> {
    profile.validate()?;
    if lambdas.is_empty() {
        return Err(Error::InvalidConfig("lambda sweep needs at least one value".into()));
    }
    if let Some(l) = lambdas.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return Err(Error::InvalidConfig(format!("lambda values must be >= 0, got {l}")));
    }
    let vgtt = profile_vgtt(profile)?.result;
    let per_trial: Vec<Vec<TrialResult>> = with_pool(workers, || {
        (0..trials_per_cell)
            .into_par_iter()
            .map(|i| run_trial_lambdas(profile, &profile.reservoir, i, lambdas))
            .collect::<Result<Vec<_>>>()
    })??;
    let cells = lambdas
        .iter()
        .enumerate()
        .map(|(c, &lambda)| {
            let mut trials: Vec<TrialResult> = per_trial.iter().map(|row| row[c].clone()).collect();
            flag_vgtt(&mut trials, &vgtt);
            SweepCell {
                summary: summarize_cell(c, vec![lambda], &trials),
                trials,
            }
        })
        .collect();
    Ok(SweepResult {
        kind: SweepKind::Lambda,
        axes: vec![SweepAxis {
            name: "lambda".into(),
            values: lambdas.to_vec(),
        }],
        trials_per_cell,
        cells,
        vgtt,
    })
}

/// Spectral radius x reservoir size grid. Cells are ordered radius-major,
/// matching the input axis order.
pub fn run_radius_size_sweep(
    profile: &ExperimentProfile,
    radii: &[f64],
    sizes: &[usize],
    trials_per_cell: usize,
    workers: usize,
) -> Result<SweepResult> {
    profile.validate()?;
    if radii.is_empty() || sizes.is_empty() {
        return Err(Error::InvalidConfig("radius/size sweep needs non-empty axes".into()));
    }
    let mut configs = Vec::with_capacity(radii.len() * sizes.len());
    for &radius in radii {
        for &n in sizes {
            let cfg = ReservoirConfig {
                n,
                spectral_radius_target: radius,
                ..profile.reservoir
            };
            cfg.validate()?;
            configs.push(cfg);
        }
    }
    let vgtt = profile_vgtt(profile)?.result;
    let jobs: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|c| (0..trials_per_cell).map(move |i| (c, i)))
        .collect();
    let results: Vec<TrialResult> = with_pool(workers, || {
        jobs.par_iter()
            .map(|&(c, i)| {
                run_trial_lambdas(profile, &configs[c], i, &[profile.lambda]).map(|mut v| v.remove(0))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let mut cells = Vec::with_capacity(configs.len());
    for (c, chunk) in results.chunks(trials_per_cell.max(1)).enumerate().take(configs.len()) {
        let mut trials = if trials_per_cell == 0 { Vec::new() } else { chunk.to_vec() };
        flag_vgtt(&mut trials, &vgtt);
        let coords = vec![configs[c].spectral_radius_target, configs[c].n as f64];
        cells.push(SweepCell {
            summary: summarize_cell(c, coords, &trials),
            trials,
        });
    }
    while cells.len() < configs.len() {
        let c = cells.len();
        let coords = vec![configs[c].spectral_radius_target, configs[c].n as f64];
        cells.push(SweepCell {
            summary: summarize_cell(c, coords, &[]),
            trials: Vec::new(),
        });
    }
    Ok(SweepResult {
        kind: SweepKind::RadiusSize,
        axes: vec![
            SweepAxis {
                name: "radius".into(),
                values: radii.to_vec(),
            },
            SweepAxis {
                name: "n".into(),
                values: sizes.iter().map(|&n| n as f64).collect(),
            },
        ],
        trials_per_cell,
        cells,
        vgtt,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenEntry {
    /// 1-based; ties keep input order.
    pub rank: usize,
    pub input_index: usize,
    pub lambda: f64,
    pub mean_early_error: f64,
    /// Mean extrapolated VPT in Lyapunov times over trials where it exists.
    pub mean_early_estimate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenResult {
    pub early_step: usize,
    pub trials: usize,
    /// Ranked best first.
    pub ranking: Vec<ScreenEntry>,
    /// `early_errors[trial][lambda_index]`.
    pub early_errors: Vec<Vec<f64>>,
}

/// Rank regularization values by the normalized error after
/// `metrics.early_step` closed-loop steps, without running full forecasts.
pub fn early_vpt_screen(
    profile: &ExperimentProfile,
    lambdas: &[f64],
    trials: usize,
    workers: usize,
) -> Result<ScreenResult> {
    profile.validate()?;
    if lambdas.is_empty() {
        return Err(Error::InvalidConfig("screen needs at least one lambda".into()));
    }
    let m = profile.metrics;
    let k = m.early_step;
    let dt = profile.dt();
    let rows: Vec<Vec<(f64, Option<f64>)>> = with_pool(workers, || {
        (0..trials)
            .into_par_iter()
            .map(|i| -> Result<Vec<(f64, Option<f64>)>> {
                let Some(trained) = train_trial(profile, &profile.reservoir, i)? else {
                    return Ok(vec![(f64::INFINITY, None); lambdas.len()]);
                };
                lambdas
                    .iter()
                    .map(|&lambda| {
                        let model = match trained.model(lambda) {
                            Ok(model) => model,
                            Err(Error::NoConvergence) => return Ok((f64::INFINITY, None)),
                            Err(e) => return Err(e),
                        };
                        let fc = forecast(&mut trained.reservoir.clone(), &model, trained.z0(), k, dt);
                        let e = match fc.trajectory.states.get(k - 1) {
                            Some(p) => (trained.data.test.states[k - 1] - *p).norm_sq() / trained.data.variance,
                            None => f64::INFINITY,
                        };
                        let est = estimate_vpt_from_initial_error(e, k as f64 * dt, m.early_slope, m.threshold, m.lyapunov_exponent)
                            .ok();
                        Ok((e, est))
                    })
                    .collect()
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let mut ranking: Vec<ScreenEntry> = lambdas
        .iter()
        .enumerate()
        .map(|(c, &lambda)| {
            let errors: Vec<f64> = rows.iter().map(|r| r[c].0).collect();
            let estimates: Vec<f64> = rows.iter().filter_map(|r| r[c].1).collect();
            ScreenEntry {
                rank: 0,
                input_index: c,
                lambda,
                mean_early_error: if errors.is_empty() { f64::NAN } else { errors.iter().sum::<f64>() / errors.len() as f64 },
                mean_early_estimate: (!estimates.is_empty()).then(|| estimates.iter().sum::<f64>() / estimates.len() as f64),
            }
        })
        .collect();
    ranking.sort_by(|a, b| a.mean_early_error.total_cmp(&b.mean_early_error));
    for (r, entry) in ranking.iter_mut().enumerate() {
        entry.rank = r + 1;
    }
    Ok(ScreenResult {
        early_step: k,
        trials,
        ranking,
        early_errors: rows.into_iter().map(|r| r.into_iter().map(|(e, _)| e).collect()).collect(),
    })
}

/// Error series between a trajectory and the ground truth it should match.
pub fn compare(truth: &Trajectory, pred: &Trajectory) -> Result<ErrorSeries> {
    normalized_error_series(truth, pred)
}
