//! Lorenz-system ground truth.
//!
//! Three independent schemes produce uniformly sampled trajectories: classical
//! fixed-step RK4, a fixed-step Adams–Bashforth–Moulton predictor/corrector
//! bootstrapped with RK4, and an adaptive Dormand–Prince 5(4) pair whose dense
//! output is evaluated on the sampling grid. The right-hand side is any
//! [`VectorField`]; only [`LorenzParams`] ships.

use std::fmt::Write as _;
use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the three-dimensional phase space.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateVec(pub [f64; 3]);

impl StateVec {
    pub const ZERO: StateVec = StateVec([0.0; 3]);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        StateVec([x, y, z])
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }

    pub fn y(&self) -> f64 {
        self.0[1]
    }

    pub fn z(&self) -> f64 {
        self.0[2]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    fn map2(self, other: StateVec, f: impl Fn(f64, f64) -> f64) -> StateVec {
        StateVec([
            f(self.0[0], other.0[0]),
            f(self.0[1], other.0[1]),
            f(self.0[2], other.0[2]),
        ])
    }
}

impl Add for StateVec {
    type Output = StateVec;
    fn add(self, rhs: StateVec) -> StateVec {
        self.map2(rhs, |a, b| a + b)
    }
}

impl AddAssign for StateVec {
    fn add_assign(&mut self, rhs: StateVec) {
        *self = *self + rhs;
    }
}

impl Sub for StateVec {
    type Output = StateVec;
    fn sub(self, rhs: StateVec) -> StateVec {
        self.map2(rhs, |a, b| a - b)
    }
}

impl Neg for StateVec {
    type Output = StateVec;
    fn neg(self) -> StateVec {
        StateVec([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl Mul<StateVec> for f64 {
    type Output = StateVec;
    fn mul(self, rhs: StateVec) -> StateVec {
        StateVec([self * rhs.0[0], self * rhs.0[1], self * rhs.0[2]])
    }
}

impl Index<usize> for StateVec {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Autonomous right-hand side `ds/dt = f(s)`.
pub trait VectorField: Sync {
    fn eval(&self, s: &StateVec) -> StateVec;
}

impl<F> VectorField for F
where
    F: Fn(&StateVec) -> StateVec + Sync,
{
    fn eval(&self, s: &StateVec) -> StateVec {
        self(s)
    }
}

/// Lorenz parameters. `rho_drive` is the Rayleigh-number parameter, not the
/// reservoir's spectral radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LorenzParams {
    pub sigma: f64,
    pub rho_drive: f64,
    pub beta: f64,
}

impl Default for LorenzParams {
    fn default() -> Self {
        LorenzParams {
            sigma: 10.0,
            rho_drive: 28.0,
            beta: 8.0 / 3.0,
        }
    }
}

impl LorenzParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma", self.sigma),
            ("rho_drive", self.rho_drive),
            ("beta", self.beta),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("lorenz.{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

impl VectorField for LorenzParams {
    fn eval(&self, s: &StateVec) -> StateVec {
        lorenz_rhs(s, self)
    }
}

pub fn lorenz_rhs(s: &StateVec, p: &LorenzParams) -> StateVec {
    let [x, y, z] = s.0;
    StateVec([
        p.sigma * (y - x),
        x * (p.rho_drive - z) - y,
        x * y - p.beta * z,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Method {
    Rk4Fixed,
    Abm54Pc,
    Dopri54Adaptive,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Rk4Fixed, Method::Abm54Pc, Method::Dopri54Adaptive];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Rk4Fixed => "RK4_FIXED",
            Method::Abm54Pc => "ABM54_PC",
            Method::Dopri54Adaptive => "DOPRI54_ADAPTIVE",
        }
    }
}

/// Integration scheme plus its step and tolerances.
///
/// `dt` is both the internal step of the fixed-step schemes and the output
/// sampling interval of every scheme. Tolerances only affect the adaptive one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub method: Method,
    pub dt: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl SolverSpec {
    pub fn new(method: Method, dt: f64) -> Self {
        SolverSpec {
            method,
            dt,
            abs_tol: 1e-12,
            rel_tol: 1e-12,
        }
    }

    pub fn with_tolerances(mut self, abs_tol: f64, rel_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self.rel_tol = rel_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("solver.dt must be > 0, got {}", self.dt)));
        }
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::InvalidConfig(
                "solver.abs_tol and solver.rel_tol must be > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Uniformly sampled trajectory: sample `k` lives at `t0 + k * dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub t0: f64,
    pub states: Vec<StateVec>,
}

impl Trajectory {
    pub fn new(dt: f64, t0: f64, states: Vec<StateVec>) -> Self {
        Trajectory { dt, t0, states }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn last(&self) -> Option<&StateVec> {
        self.states.last()
    }

    /// Sub-trajectory `[start, end)` with its time origin moved accordingly.
    pub fn slice(&self, start: usize, end: usize) -> Trajectory {
        Trajectory {
            dt: self.dt,
            t0: self.time(start),
            states: self.states[start..end].to_vec(),
        }
    }

    pub fn with_t0(mut self, t0: f64) -> Self {
        self.t0 = t0;
        self
    }

    /// Max-norm distance between two trajectories over their common prefix.
    pub fn max_abs_diff(&self, other: &Trajectory) -> f64 {
        self.states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| (*a - *b).max_abs())
            .fold(0.0, f64::max)
    }

    /// CSV with header `t,x,y,z`, 17 significant digits, LF endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.states.len() * 96 + 8);
        out.push_str("t,x,y,z\n");
        for (k, s) in self.states.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                fmt_sig17(self.time(k)),
                fmt_sig17(s.x()),
                fmt_sig17(s.y()),
                fmt_sig17(s.z())
            );
        }
        out
    }
}

/// Scientific notation with 17 significant digits.
pub fn fmt_sig17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Number of grid samples in `[0, span]` at spacing `dt`, tolerant of
/// representation error in `span / dt`.
pub fn grid_len(span: f64, dt: f64) -> usize {
    let ratio = span / dt;
    let nearest = ratio.round();
    let steps = if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        ratio.floor()
    };
    steps as usize + 1
}

fn check_finite(s: &StateVec, t: f64) -> Result<()> {
    if s.is_finite() {
        Ok(())
    } else {
        Err(Error::NonfiniteState { time: t })
    }
}

pub fn rk4_step<F: VectorField + ?Sized>(field: &F, s: &StateVec, h: f64) -> StateVec {
    let k1 = field.eval(s);
    let k2 = field.eval(&(*s + (0.5 * h) * k1));
    let k3 = field.eval(&(*s + (0.5 * h) * k2));
    let k4 = field.eval(&(*s + h * k3));
    *s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

pub fn rk4_integrate<F: VectorField + ?Sized>(
    field: &F,
    s0: StateVec,
    dt: f64,
    t_end: f64,
) -> Result<Trajectory> {
    let m = grid_len(t_end, dt);
    let mut states = Vec::with_capacity(m);
    states.push(s0);
    let mut s = s0;
    for k in 1..m {
        s = rk4_step(field, &s, dt);
        check_finite(&s, k as f64 * dt)?;
        states.push(s);
    }
    Ok(Trajectory::new(dt, 0.0, states))
}

// Adams–Bashforth 5-step predictor, newest derivative first.
const AB5: [f64; 5] = [1901.0, -2774.0, 2616.0, -1274.0, 251.0];
// Adams–Moulton 4-step corrector: f_{n+1}, f_n, f_{n-1}, f_{n-2}, f_{n-3}.
const AM4: [f64; 5] = [251.0, 646.0, -264.0, 106.0, -19.0];

/// Fixed-step PECE: five-step Adams–Bashforth prediction, one four-step
/// Adams–Moulton correction. The first four steps are taken with RK4.
pub fn abm54_pc_integrate<F: VectorField + ?Sized>(
    field: &F,
    s0: StateVec,
    spec: &SolverSpec,
    t_end: f64,
) -> Result<Trajectory> {
    let dt = spec.dt;
    let m = grid_len(t_end, dt);
    let mut states = Vec::with_capacity(m);
    states.push(s0);
    // history[0] is f at the newest accepted state
    let mut history = [StateVec::ZERO; 5];
    history[0] = field.eval(&s0);
    let mut s = s0;
    let h720 = dt / 720.0;
    for k in 1..m {
        let t = k as f64 * dt;
        if k <= 4 {
            s = rk4_step(field, &s, dt);
        } else {
            let mut pred = s;
            for (c, f) in AB5.iter().zip(&history) {
                pred += (h720 * c) * *f;
            }
            check_finite(&pred, t)?;
            let f_pred = field.eval(&pred);
            let mut corr = s + (h720 * AM4[0]) * f_pred;
            for (c, f) in AM4[1..].iter().zip(&history[..4]) {
                corr += (h720 * c) * *f;
            }
            s = corr;
        }
        check_finite(&s, t)?;
        history.rotate_right(1);
        history[0] = field.eval(&s);
        states.push(s);
    }
    Ok(Trajectory::new(dt, 0.0, states))
}

mod dp {

    pub const A21: f64 = 1.0 / 5.0;
    pub const A31: f64 = 3.0 / 40.0;
    pub const A32: f64 = 9.0 / 40.0;
    pub const A41: f64 = 44.0 / 45.0;
    pub const A42: f64 = -56.0 / 15.0;
    pub const A43: f64 = 32.0 / 9.0;
    pub const A51: f64 = 19372.0 / 6561.0;
    pub const A52: f64 = -25360.0 / 2187.0;
    pub const A53: f64 = 64448.0 / 6561.0;
    pub const A54: f64 = -212.0 / 729.0;
    pub const A61: f64 = 9017.0 / 3168.0;
    pub const A62: f64 = -355.0 / 33.0;
    pub const A63: f64 = 46732.0 / 5247.0;
    pub const A64: f64 = 49.0 / 176.0;
    pub const A65: f64 = -5103.0 / 18656.0;
    pub const A71: f64 = 35.0 / 384.0;
    pub const A73: f64 = 500.0 / 1113.0;
    pub const A74: f64 = 125.0 / 192.0;
    pub const A75: f64 = -2187.0 / 6784.0;
    pub const A76: f64 = 11.0 / 84.0;

    // difference between the 5th- and 4th-order weights
    pub const E1: f64 = 71.0 / 57600.0;
    pub const E3: f64 = -71.0 / 16695.0;
    pub const E4: f64 = 71.0 / 1920.0;
    pub const E5: f64 = -17253.0 / 339200.0;
    pub const E6: f64 = 22.0 / 525.0;
    pub const E7: f64 = -1.0 / 40.0;

    // dense output
    pub const D1: f64 = -12715105075.0 / 11282082432.0;
    pub const D3: f64 = 87487479700.0 / 32700410799.0;
    pub const D4: f64 = -10690763975.0 / 1880347072.0;
    pub const D5: f64 = 701980252875.0 / 199316789632.0;
    pub const D6: f64 = -1453857185.0 / 822651844.0;
    pub const D7: f64 = 69997945.0 / 29380423.0;
}

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

/// Accepted Dormand–Prince step with its continuous extension.
#[derive(Debug, Clone, Copy)]
pub struct AcceptedStep {
    pub t_start: f64,
    pub t_end: f64,
    pub h: f64,
    pub y_start: StateVec,
    pub y_end: StateVec,
    cont: [StateVec; 4],
}

impl AcceptedStep {
    /// Evaluate the 4th-order dense output at `theta = (t - t_start) / h` in `[0, 1]`.
    pub fn interpolate(&self, theta: f64) -> StateVec {
        let [r2, r3, r4, r5] = self.cont;
        let theta1 = 1.0 - theta;
        self.y_start + theta * (r2 + theta1 * (r3 + theta * (r4 + theta1 * r5)))
    }
}

/// Adaptive Dormand–Prince 5(4) stepper (FSAL, proportional step control).
pub struct Dopri54<'a, F: VectorField + ?Sized> {
    field: &'a F,
    t: f64,
    y: StateVec,
    f: StateVec,
    h: f64,
    h_max: f64,
    abs_tol: f64,
    rel_tol: f64,
    pub accepted: usize,
    pub rejected: usize,
}

impl<'a, F: VectorField + ?Sized> Dopri54<'a, F> {
    pub fn new(field: &'a F, t0: f64, y0: StateVec, abs_tol: f64, rel_tol: f64, h_max: f64) -> Self {
        let f = field.eval(&y0);
        let mut stepper = Dopri54 {
            field,
            t: t0,
            y: y0,
            f,
            h: 0.0,
            h_max,
            abs_tol,
            rel_tol,
            accepted: 0,
            rejected: 0,
        };
        stepper.h = stepper.initial_step();
        stepper
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> StateVec {
        self.y
    }

    pub fn step_size(&self) -> f64 {
        self.h
    }

    fn scaled_norm(&self, v: &StateVec, y: &StateVec) -> f64 {
        let sum: f64 = (0..3)
            .map(|i| {
                let sk = self.abs_tol + self.rel_tol * y[i].abs();
                (v[i] / sk).powi(2)
            })
            .sum();
        (sum / 3.0).sqrt()
    }

    // Starting step heuristic from Hairer, Nørsett & Wanner.
    fn initial_step(&self) -> f64 {
        let d0 = self.scaled_norm(&self.y, &self.y);
        let d1 = self.scaled_norm(&self.f, &self.y);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(self.h_max);
        let y1 = self.y + h0 * self.f;
        let f1 = self.field.eval(&y1);
        let d2 = self.scaled_norm(&(f1 - self.f), &self.y) / h0;
        let dmax = d1.max(d2);
        let h1 = if dmax <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / dmax).powf(0.2)
        };
        (100.0 * h0).min(h1).min(self.h_max)
    }

    /// Advance by one accepted step, never stepping past `t_limit`.
    pub fn step(&mut self, t_limit: f64) -> Result<AcceptedStep> {
        use dp::*;
        let field = self.field;
        loop {
            let remaining = t_limit - self.t;
            let mut h = self.h.min(remaining);
            // land on t_limit rather than leave a sliver step behind
            let lands = remaining - h <= 1e-12 * remaining.abs().max(1.0);
            if lands {
                h = remaining;
            }
            let floor = 1e3 * f64::EPSILON * self.t.abs();
            if !(h > floor) {
                return Err(Error::StepUnderflow { time: self.t, step: h });
            }
            let y = self.y;
            let k1 = self.f;
            let k2 = field.eval(&(y + (h * A21) * k1));
            let k3 = field.eval(&(y + h * (A31 * k1 + A32 * k2)));
            let k4 = field.eval(&(y + h * (A41 * k1 + A42 * k2 + A43 * k3)));
            let k5 = field.eval(&(y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4)));
            let k6 = field.eval(&(y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5)));
            let y_new = y + h * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6);
            let k7 = field.eval(&y_new);
            let err_vec = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
            let err = {
                let sum: f64 = (0..3)
                    .map(|i| {
                        let sk = self.abs_tol + self.rel_tol * y[i].abs().max(y_new[i].abs());
                        (err_vec[i] / sk).powi(2)
                    })
                    .sum();
                (sum / 3.0).sqrt()
            };
            if !err.is_finite() || !y_new.is_finite() {
                // blow-up inside the trial step: shrink hard, then give up via underflow
                self.rejected += 1;
                self.h = h * MIN_FACTOR;
                if !y.is_finite() {
                    return Err(Error::NonfiniteState { time: self.t });
                }
                continue;
            }
            let factor = if err == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            if err <= 1.0 {
                let ydiff = y_new - y;
                let bspl = h * k1 - ydiff;
                let cont = [
                    ydiff,
                    bspl,
                    ydiff - h * k7 - bspl,
                    h * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7),
                ];
                let t_end = if lands { t_limit } else { self.t + h };
                let accepted = AcceptedStep {
                    t_start: self.t,
                    t_end,
                    h,
                    y_start: y,
                    y_end: y_new,
                    cont,
                };
                self.t = t_end;
                self.y = y_new;
                self.f = k7;
                self.h = (h * factor).min(self.h_max);
                self.accepted += 1;
                return Ok(accepted);
            }
            self.rejected += 1;
            self.h = h * factor.min(1.0);
        }
    }
}

/// Adaptive Dormand–Prince 5(4) integration sampled on the uniform grid `k * dt`.
pub fn dopri54_integrate<F: VectorField + ?Sized>(
    field: &F,
    s0: StateVec,
    spec: &SolverSpec,
    t_end: f64,
) -> Result<Trajectory> {
    let dt = spec.dt;
    let m = grid_len(t_end, dt);
    let mut states = Vec::with_capacity(m);
    states.push(s0);
    if m == 1 {
        return Ok(Trajectory::new(dt, 0.0, states));
    }
    let t_last = (m - 1) as f64 * dt;
    let mut stepper = Dopri54::new(field, 0.0, s0, spec.abs_tol, spec.rel_tol, t_last);
    let mut k = 1;
    while k < m {
        let step = stepper.step(t_last)?;
        let final_step = step.t_end >= t_last;
        while k < m {
            let tk = k as f64 * dt;
            let s = if (k == m - 1 && final_step) || tk == step.t_end {
                step.y_end
            } else if tk < step.t_end {
                step.interpolate((tk - step.t_start) / step.h)
            } else {
                break;
            };
            check_finite(&s, tk)?;
            states.push(s);
            k += 1;
        }
    }
    Ok(Trajectory::new(dt, 0.0, states))
}

/// Integrate from `t = 0` to `t_end` with the scheme named by `spec`.
pub fn integrate<F: VectorField + ?Sized>(
    field: &F,
    s0: StateVec,
    spec: &SolverSpec,
    t_end: f64,
) -> Result<Trajectory> {
    spec.validate()?;
    if !(t_end >= 0.0) {
        return Err(Error::InvalidConfig(format!("t_end must be >= 0, got {t_end}")));
    }
    check_finite(&s0, 0.0)?;
    match spec.method {
        Method::Rk4Fixed => rk4_integrate(field, s0, spec.dt, t_end),
        Method::Abm54Pc => abm54_pc_integrate(field, s0, spec, t_end),
        Method::Dopri54Adaptive => dopri54_integrate(field, s0, spec, t_end),
    }
}

/// Integrate for `warmup_time` and return only the final state.
pub fn attractor_warmup<F: VectorField + ?Sized>(
    field: &F,
    s0: StateVec,
    spec: &SolverSpec,
    warmup_time: f64,
) -> Result<StateVec> {
    if warmup_time == 0.0 {
        return Ok(s0);
    }
    let traj = integrate(field, s0, spec, warmup_time)?;
    Ok(*traj.last().expect("trajectory has at least one sample"))
}
