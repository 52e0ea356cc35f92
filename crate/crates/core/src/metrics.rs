//! Forecast-quality metrics: normalized squared error, valid prediction time
//! (VPT), valid ground-truth time (VGTT) across solvers, and the exponential
//! error-growth fit used to extrapolate VPT from the first few steps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lorenz::Trajectory;
use crate::numerics::linear_fit;
use crate::{DEFAULT_VPT_THRESHOLD, LORENZ_LYAPUNOV_EXPONENT};

/// Default growth window for log-error slope fits.
pub const DEFAULT_SLOPE_WINDOW: (f64, f64) = (1e-10, 1e-2);

const MIN_WINDOW_SAMPLES: usize = 10;

/// Normalized squared error sampled every `dt`, first value at `t0`.
/// Non-finite values mark a diverged forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSeries {
    pub dt: f64,
    pub t0: f64,
    pub values: Vec<f64>,
}

impl ErrorSeries {
    pub fn new(dt: f64, t0: f64, values: Vec<f64>) -> Self {
        ErrorSeries { dt, t0, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// Time of the last sample.
    pub fn horizon(&self) -> f64 {
        self.time(self.values.len().saturating_sub(1))
    }
}

/// Total variance of a trajectory: the time average of the squared distance
/// from the per-coordinate time means.
pub fn trajectory_variance(truth: &Trajectory) -> f64 {
    let n = truth.len() as f64;
    let mut mean = [0.0; 3];
    for s in &truth.states {
        for d in 0..3 {
            mean[d] += s[d];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    truth
        .states
        .iter()
        .map(|s| (0..3).map(|d| (s[d] - mean[d]).powi(2)).sum::<f64>())
        .sum::<f64>()
        / n
}

/// `E(t) = |u_true(t) - u_pred(t)|^2 / Var(u_true)`, with the variance taken
/// over the compared truth segment.
pub fn normalized_error_series(truth: &Trajectory, pred: &Trajectory) -> Result<ErrorSeries> {
    if truth.len() != pred.len() || truth.dt != pred.dt {
        return Err(Error::DimensionMismatch(format!(
            "truth has {} samples at dt {}, prediction {} at dt {}",
            truth.len(),
            truth.dt,
            pred.len(),
            pred.dt
        )));
    }
    if truth.len() < 2 {
        return Err(Error::InsufficientData("error series needs at least two samples".into()));
    }
    let var = trajectory_variance(truth);
    if var == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(error_series_with_variance(truth, &pred.states, var))
}

/// Normalized error against a fixed variance. When `pred` is shorter than
/// `truth` (a truncated, diverged forecast) the missing tail is `+inf`.
pub fn error_series_with_variance(
    truth: &Trajectory,
    pred: &[crate::lorenz::StateVec],
    variance: f64,
) -> ErrorSeries {
    let values = truth
        .states
        .iter()
        .enumerate()
        .map(|(k, u)| match pred.get(k) {
            Some(p) => (*u - *p).norm_sq() / variance,
            None => f64::INFINITY,
        })
        .collect();
    ErrorSeries::new(truth.dt, truth.t0, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VptResult {
    /// False when the error stayed below threshold over the whole series.
    pub crossed: bool,
    /// Crossing time in model time units, or the series horizon.
    pub t_raw: f64,
    /// `t_raw` in Lyapunov times.
    pub vpt_lyap: f64,
    pub threshold: f64,
    pub lyapunov_exponent: f64,
}

impl VptResult {
    fn at(t_raw: f64, crossed: bool, threshold: f64, lyap: f64) -> Self {
        VptResult {
            crossed,
            t_raw,
            vpt_lyap: t_raw * lyap,
            threshold,
            lyapunov_exponent: lyap,
        }
    }
}

/// First time the error exceeds `threshold`; non-finite values count as exceeded.
pub fn vpt(e: &ErrorSeries, threshold: f64, lyap: f64) -> VptResult {
    match e.values.iter().position(|&v| !(v <= threshold)) {
        Some(k) => VptResult::at(e.time(k), true, threshold, lyap),
        None => VptResult::at(e.horizon(), false, threshold, lyap),
    }
}

pub fn vpt_default(e: &ErrorSeries) -> VptResult {
    vpt(e, DEFAULT_VPT_THRESHOLD, LORENZ_LYAPUNOV_EXPONENT)
}

/// Agreement time of one pair of trajectories, both orientations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairCrossing {
    pub first: usize,
    pub second: usize,
    /// `first` as truth.
    pub forward: VptResult,
    /// `second` as truth.
    pub backward: VptResult,
}

impl PairCrossing {
    pub fn earliest(&self) -> VptResult {
        if self.backward.t_raw < self.forward.t_raw {
            self.backward
        } else {
            self.forward
        }
    }
}

/// Valid ground-truth time plus every pairwise crossing. The result is the
/// earliest crossing over all pairs and both orientations, so it does not
/// depend on the order of `trajs`.
pub fn vgtt_pairs(
    trajs: &[Trajectory],
    threshold: f64,
    lyap: f64,
) -> Result<(VptResult, Vec<PairCrossing>)> {
    if trajs.len() < 2 {
        return Err(Error::InsufficientData("VGTT needs at least two trajectories".into()));
    }
    let mut pairs = Vec::with_capacity(trajs.len() * (trajs.len() - 1) / 2);
    for i in 0..trajs.len() {
        for j in i + 1..trajs.len() {
            let forward = vpt(&normalized_error_series(&trajs[i], &trajs[j])?, threshold, lyap);
            let backward = vpt(&normalized_error_series(&trajs[j], &trajs[i])?, threshold, lyap);
            pairs.push(PairCrossing {
                first: i,
                second: j,
                forward,
                backward,
            });
        }
    }
    let overall = pairs
        .iter()
        .map(PairCrossing::earliest)
        .fold(None, |best: Option<VptResult>, r| match best {
            Some(b) if b.t_raw <= r.t_raw => Some(b),
            _ => Some(r),
        })
        .expect("at least one pair");
    Ok((overall, pairs))
}

pub fn vgtt(trajs: &[Trajectory], threshold: f64, lyap: f64) -> Result<VptResult> {
    Ok(vgtt_pairs(trajs, threshold, lyap)?.0)
}

/// Logarithm used on the error axis of a slope fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LogScale {
    /// `ln E`: the slope is the exponential growth rate of `E`.
    #[default]
    Natural,
    /// `log10 E`: decades per unit time, as read off a log-scale plot.
    Decimal,
}

impl LogScale {
    /// Converts a natural-log slope to this scale.
    pub fn from_natural(self, slope: f64) -> f64 {
        match self {
            LogScale::Natural => slope,
            LogScale::Decimal => slope / std::f64::consts::LN_10,
        }
    }
}

/// Straight-line fit to the log of an error series over its growth phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub scale: LogScale,
    pub window: (f64, f64),
    pub samples: usize,
}

/// Least-squares line through `(t, ln E(t))` over the growth phase: samples
/// before the error first reaches `e_high` whose value exceeds `e_low`.
/// Time stays in model units so the slope compares directly with the
/// Lyapunov exponent.
pub fn log_error_slope(e: &ErrorSeries, e_low: f64, e_high: f64) -> Result<SlopeFit> {
    log_error_slope_in(e, e_low, e_high, LogScale::Natural)
}

/// [`log_error_slope`] with a choice of logarithm.
pub fn log_error_slope_in(e: &ErrorSeries, e_low: f64, e_high: f64, scale: LogScale) -> Result<SlopeFit> {
    let end = e
        .values
        .iter()
        .position(|&v| !(v < e_high))
        .unwrap_or(e.values.len());
    let log = |v: f64| match scale {
        LogScale::Natural => v.ln(),
        LogScale::Decimal => v.log10(),
    };
    let (xs, ys): (Vec<f64>, Vec<f64>) = e.values[..end]
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > e_low)
        .map(|(k, &v)| (e.time(k), log(v)))
        .unzip();
    if xs.len() < MIN_WINDOW_SAMPLES {
        return Err(Error::InsufficientGrowthWindow {
            found: xs.len(),
            needed: MIN_WINDOW_SAMPLES,
            low: e_low,
            high: e_high,
        });
    }
    let fit = linear_fit(&xs, &ys)?;
    Ok(SlopeFit {
        slope: fit.slope,
        intercept: fit.intercept,
        scale,
        window: (e_low, e_high),
        samples: xs.len(),
    })
}

/// Extrapolated VPT (Lyapunov times) assuming the error grows as
/// `e_k * exp(slope * (t - t_k))` after time `t_k`.
pub fn estimate_vpt_from_initial_error(
    e_k: f64,
    t_k: f64,
    slope: f64,
    threshold: f64,
    lyap: f64,
) -> Result<f64> {
    if !(e_k < threshold) {
        return Err(Error::AlreadyExceeded {
            error: e_k,
            threshold,
        });
    }
    if !(slope > 0.0) {
        return Err(Error::NonpositiveSlope(slope));
    }
    if !(e_k > 0.0) {
        return Err(Error::InvalidConfig(format!("initial error must be > 0, got {e_k}")));
    }
    Ok((t_k + (threshold.ln() - e_k.ln()) / slope) * lyap)
}

/// Serialized metric summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub threshold: f64,
    pub lyapunov_exponent: f64,
    pub t_raw: f64,
    pub vpt_lyap: f64,
    pub crossed: bool,
    pub slope: Option<f64>,
    pub window: (f64, f64),
}

impl MetricReport {
    pub fn new(vpt: &VptResult, slope: Option<&SlopeFit>, window: (f64, f64)) -> Self {
        MetricReport {
            threshold: vpt.threshold,
            lyapunov_exponent: vpt.lyapunov_exponent,
            t_raw: vpt.t_raw,
            vpt_lyap: vpt.vpt_lyap,
            crossed: vpt.crossed,
            slope: slope.map(|s| s.slope),
            window,
        }
    }
}
