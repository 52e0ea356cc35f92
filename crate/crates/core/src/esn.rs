//! Echo state network: sparse random reservoir, teacher-forced state
//! collection, ridge readout and closed-loop forecasting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lorenz::{integrate, LorenzParams, SolverSpec, StateVec, Trajectory};
use crate::numerics::{rescale_to_radius, DenseMat, RidgeFactorization, SparseMat, DEFAULT_RCOND};

/// Input dimension: the three Lorenz coordinates.
pub const INPUT_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE", deny_unknown_fields)]
pub enum Activation {
    Tanh,
    /// `x / (1 + exp(-beta x))`
    Swish { beta: f64 },
}

impl Activation {
    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            Activation::Tanh => x.tanh(),
            Activation::Swish { beta } => x / (1.0 + (-beta * x).exp()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReservoirConfig {
    pub n: usize,
    /// Mean number of nonzeros per row of the connectivity matrix.
    pub expected_degree: f64,
    pub spectral_radius_target: f64,
    /// Input weights are drawn from `[-input_scaling, input_scaling]`.
    pub input_scaling: f64,
    pub activation: Activation,
    pub washout_steps: usize,
    pub seed: u64,
}

impl Default for ReservoirConfig {
    fn default() -> Self {
        ReservoirConfig {
            n: 300,
            expected_degree: 6.0,
            spectral_radius_target: 0.5,
            input_scaling: 0.1,
            activation: Activation::Tanh,
            washout_steps: 1000,
            seed: 0,
        }
    }
}

impl ReservoirConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n == 0 {
            return bad("reservoir.n must be >= 1".into());
        }
        if !(self.expected_degree >= 0.0 && self.expected_degree <= self.n as f64) {
            return bad(format!(
                "reservoir.expected_degree must lie in [0, n = {}], got {}",
                self.n, self.expected_degree
            ));
        }
        if !(self.spectral_radius_target >= 0.0 && self.spectral_radius_target.is_finite()) {
            return bad("reservoir.spectral_radius_target must be >= 0".into());
        }
        if !(self.input_scaling > 0.0 && self.input_scaling.is_finite()) {
            return bad("reservoir.input_scaling must be > 0".into());
        }
        if let Activation::Swish { beta } = self.activation {
            if !beta.is_finite() {
                return bad("reservoir.activation.beta must be finite".into());
            }
        }
        Ok(())
    }
}

/// Connectivity `a`, input weights `w_in` and the evolving state.
#[derive(Debug, Clone)]
pub struct Reservoir {
    pub a: SparseMat,
    pub w_in: DenseMat,
    pub state: Vec<f64>,
    pub activation: Activation,
    /// Seed that produced `a` and `w_in` (differs from the config seed after a resample).
    pub seed_used: u64,
    scratch: Vec<f64>,
}

/// Sample a reservoir. Every entry of the connectivity matrix is 1 with
/// probability `expected_degree / n` (diagonal included) before rescaling to
/// the target radius. If the draw is all zero while a positive radius is
/// requested, one resample with `seed + 1` is attempted.
pub fn build_reservoir(cfg: &ReservoirConfig) -> Result<Reservoir> {
    cfg.validate()?;
    let mut last_err = Error::ZeroRadiusInput;
    for attempt in 0..2u64 {
        let seed = cfg.seed.wrapping_add(attempt);
        match sample_reservoir(cfg, seed) {
            Ok(res) => return Ok(res),
            Err(Error::ZeroRadiusInput) => last_err = Error::ZeroRadiusInput,
            Err(e) => return Err(e),
        }
    }
    Err(last_err)
}

fn sample_reservoir(cfg: &ReservoirConfig, seed: u64) -> Result<Reservoir> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.n;
    let p = cfg.expected_degree / n as f64;
    let mut triplets = Vec::with_capacity((p * (n * n) as f64 * 1.2) as usize + 8);
    for i in 0..n {
        for j in 0..n {
            if rng.random::<f64>() < p {
                triplets.push((i, j, 1.0));
            }
        }
    }
    let raw = SparseMat::from_triplets(n, triplets)?;
    let s = cfg.input_scaling;
    let w_in = DenseMat::from_fn(n, INPUT_DIM, |_, _| rng.random_range(-s..=s));
    let a = rescale_to_radius(&raw, cfg.spectral_radius_target, &mut rng)?;
    Ok(Reservoir {
        a,
        w_in,
        state: vec![0.0; n],
        activation: cfg.activation,
        seed_used: seed,
        scratch: vec![0.0; n],
    })
}

impl Reservoir {
    pub fn from_parts(a: SparseMat, w_in: DenseMat, activation: Activation) -> Result<Self> {
        if w_in.rows() != a.dim() || w_in.cols() != INPUT_DIM {
            return Err(Error::DimensionMismatch(format!(
                "input weights must be {}x{INPUT_DIM}, got {}x{}",
                a.dim(),
                w_in.rows(),
                w_in.cols()
            )));
        }
        let n = a.dim();
        Ok(Reservoir {
            a,
            w_in,
            state: vec![0.0; n],
            activation,
            seed_used: 0,
            scratch: vec![0.0; n],
        })
    }

    pub fn size(&self) -> usize {
        self.a.dim()
    }

    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|v| *v = 0.0);
    }

    /// `state <- f(A state + W_in z)`.
    pub fn drive(&mut self, z: &StateVec) -> Result<&[f64]> {
        self.scratch.iter_mut().for_each(|v| *v = 0.0);
        self.a.matvec_add_into(&self.state, &mut self.scratch);
        self.w_in.matvec_add_into(z.as_slice(), &mut self.scratch);
        let f = self.activation;
        let mut finite = true;
        for (s, pre) in self.state.iter_mut().zip(&self.scratch) {
            *s = f.apply(*pre);
            finite &= s.is_finite();
        }
        if !finite {
            return Err(Error::NonfiniteState { time: f64::NAN });
        }
        Ok(&self.state)
    }
}

/// Teacher forcing: the state after consuming sample `k` is paired with
/// sample `k + 1`. The first `washout` pairs are dropped, leaving
/// `len - 1 - washout` columns.
pub fn collect_states(
    res: &mut Reservoir,
    traj: &Trajectory,
    washout: usize,
) -> Result<(DenseMat, DenseMat)> {
    let m = traj.len();
    if m < washout + 2 {
        return Err(Error::InsufficientData(format!(
            "{m} samples cannot cover a washout of {washout} plus one training pair"
        )));
    }
    let n = res.size();
    let cols = m - 1 - washout;
    let mut states = DenseMat::zeros(n, cols);
    let mut targets = DenseMat::zeros(INPUT_DIM, cols);
    for k in 0..m - 1 {
        let r = res
            .drive(&traj.states[k])
            .map_err(|_| Error::NonfiniteState { time: traj.time(k) })?;
        if k >= washout {
            let col = k - washout;
            for (i, v) in r.iter().enumerate() {
                states.set(i, col, *v);
            }
            for d in 0..INPUT_DIM {
                targets.set(d, col, traj.states[k + 1][d]);
            }
        }
    }
    Ok((states, targets))
}

/// Trained linear readout `z_hat = W_out r`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutModel {
    pub w_out: DenseMat,
    pub lambda_used: f64,
}

impl ReadoutModel {
    pub fn from_factorization(fact: &RidgeFactorization, lambda: f64) -> Result<Self> {
        Ok(ReadoutModel {
            w_out: fact.solve(lambda)?,
            lambda_used: lambda,
        })
    }

    pub fn readout(&self, r: &[f64]) -> StateVec {
        let mut out = [0.0; INPUT_DIM];
        self.w_out.matvec_add_into(r, &mut out);
        StateVec(out)
    }
}

pub fn train_readout(states: &DenseMat, targets: &DenseMat, lambda: f64) -> Result<ReadoutModel> {
    let fact = RidgeFactorization::new(states, targets, DEFAULT_RCOND)?;
    ReadoutModel::from_factorization(&fact, lambda)
}

/// Closed-loop forecast that stops at the first non-finite value.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    /// Finite predictions, sample `k` at time `(k + 1) * dt`.
    pub trajectory: Trajectory,
    /// Step count that was requested.
    pub requested: usize,
    pub diverged: bool,
}

/// Feed each readout back as the next input, starting from `z0`.
pub fn forecast(
    res: &mut Reservoir,
    model: &ReadoutModel,
    z0: StateVec,
    steps: usize,
    dt: f64,
) -> Forecast {
    let mut out = Vec::with_capacity(steps);
    let mut input = z0;
    let mut diverged = false;
    for _ in 0..steps {
        let z_hat = match res.drive(&input) {
            Ok(r) => model.readout(r),
            Err(_) => {
                diverged = true;
                break;
            }
        };
        if !z_hat.is_finite() {
            diverged = true;
            break;
        }
        out.push(z_hat);
        input = z_hat;
    }
    Forecast {
        trajectory: Trajectory::new(dt, dt, out),
        requested: steps,
        diverged,
    }
}

/// Autonomous prediction of `steps` samples; divergence is an error.
pub fn predict_autonomous(
    res: &mut Reservoir,
    model: &ReadoutModel,
    z0: StateVec,
    steps: usize,
    dt: f64,
) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::InvalidConfig("prediction needs at least one step".into()));
    }
    let fc = forecast(res, model, z0, steps, dt);
    if fc.diverged {
        let k = fc.trajectory.len();
        return Err(Error::NonfiniteState {
            time: (k + 1) as f64 * dt,
        });
    }
    Ok(fc.trajectory)
}

/// Best-case reference: one reservoir step from `z0`, then the exact Lorenz
/// flow from that prediction for `horizon` time units. The reservoir itself
/// is left untouched. Sample `k` of the result lives at `(k + 1) * spec.dt`.
pub fn one_step_benchmark(
    res: &Reservoir,
    model: &ReadoutModel,
    z0: StateVec,
    lorenz: &LorenzParams,
    spec: &SolverSpec,
    horizon: f64,
) -> Result<Trajectory> {
    let mut probe = res.clone();
    let first = predict_autonomous(&mut probe, model, z0, 1, spec.dt)?;
    let start = first.states[0];
    Ok(integrate(lorenz, start, spec, horizon)?.with_t0(spec.dt))
}

/// Reproducibility record for a trained readout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelExport {
    pub config: ReservoirConfig,
    pub lambda: f64,
    pub rows: usize,
    pub cols: usize,
    /// Row-major `W_out`.
    pub w_out: Vec<f64>,
    pub seed: u64,
}

impl ModelExport {
    pub fn new(config: &ReservoirConfig, res: &Reservoir, model: &ReadoutModel) -> Self {
        ModelExport {
            config: *config,
            lambda: model.lambda_used,
            rows: model.w_out.rows(),
            cols: model.w_out.cols(),
            w_out: model.w_out.data().to_vec(),
            seed: res.seed_used,
        }
    }

    pub fn to_model(&self) -> Result<ReadoutModel> {
        Ok(ReadoutModel {
            w_out: DenseMat::new(self.rows, self.cols, self.w_out.clone())?,
            lambda_used: self.lambda,
        })
    }
}
