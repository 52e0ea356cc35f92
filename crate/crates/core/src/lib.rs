//! Reservoir-computing forecasts of the Lorenz system.
//!
//! The crate covers the full experimental pipeline: ground-truth generation
//! with several independent integrators ([`lorenz`]), the linear algebra the
//! reservoir needs ([`numerics`]), the echo state network itself ([`esn`]),
//! forecast-quality metrics ([`metrics`]) and seeded multi-trial sweeps
//! ([`harness`]).

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod esn;
pub mod harness;
pub mod lorenz;
pub mod metrics;
pub mod numerics;

pub use error::{Error, Result};
pub use esn::{Activation, ReadoutModel, Reservoir, ReservoirConfig};
pub use harness::{ExperimentProfile, SweepResult, TrialResult};
pub use lorenz::{LorenzParams, Method, SolverSpec, StateVec, Trajectory};
pub use metrics::{ErrorSeries, LogScale, VptResult};
pub use numerics::{DenseMat, SparseMat};

/// Maximal Lyapunov exponent of the Lorenz system at the classic parameters.
pub const LORENZ_LYAPUNOV_EXPONENT: f64 = 0.9056;

/// Normalized-error level that ends a valid prediction.
pub const DEFAULT_VPT_THRESHOLD: f64 = 0.4;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
