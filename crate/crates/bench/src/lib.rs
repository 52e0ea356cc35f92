//! Fixtures shared by the benchmarks.

use chaosrc_core::esn::{build_reservoir, collect_states, Reservoir, ReservoirConfig};
use chaosrc_core::lorenz::{attractor_warmup, integrate, LorenzParams, Method, SolverSpec, StateVec, Trajectory};
use chaosrc_core::numerics::DenseMat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn attractor_state() -> StateVec {
    let spec = SolverSpec::new(Method::Rk4Fixed, 1e-2);
    attractor_warmup(&LorenzParams::default(), StateVec::new(1.0, 0.0, 0.0), &spec, 20.0).expect("warmup")
}

pub fn lorenz_series(dt: f64, time: f64) -> Trajectory {
    let spec = SolverSpec::new(Method::Rk4Fixed, dt);
    integrate(&LorenzParams::default(), attractor_state(), &spec, time).expect("integration")
}

pub fn reservoir(n: usize) -> Reservoir {
    build_reservoir(&ReservoirConfig {
        n,
        ..ReservoirConfig::default()
    })
    .expect("reservoir")
}

/// Teacher-forced states and targets for `samples` steps of Lorenz data.
pub fn training_pair(n: usize, samples: usize) -> (DenseMat, DenseMat) {
    let data = lorenz_series(1e-2, (samples + 100) as f64 * 1e-2);
    let mut res = reservoir(n);
    collect_states(&mut res, &data, 100).expect("states")
}

pub fn random_dense(rows: usize, cols: usize, seed: u64) -> DenseMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseMat::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}
