use chaosrc_core::lorenz::{attractor_warmup, integrate, LorenzParams, Method, SolverSpec, StateVec, Trajectory};
use proptest::prelude::*;

fn on_attractor() -> StateVec {
    let spec = SolverSpec::new(Method::Rk4Fixed, 1e-3);
    attractor_warmup(&LorenzParams::default(), StateVec::new(1.0, 0.0, 0.0), &spec, 20.0).unwrap()
}

fn endpoint(method: Method, s0: StateVec, dt: f64, tol: f64, t_end: f64) -> StateVec {
    let spec = SolverSpec::new(method, dt).with_tolerances(tol, tol);
    *integrate(&LorenzParams::default(), s0, &spec, t_end).unwrap().last().unwrap()
}

fn max_diff(a: StateVec, b: StateVec) -> f64 {
    (a - b).max_abs()
}

/// Observed orders `log2(e(h) / e(h/2))` over successive halvings.
fn observed_orders(method: Method, dts: &[f64]) -> Vec<f64> {
    let s0 = on_attractor();
    let reference = endpoint(Method::Dopri54Adaptive, s0, 1e-3, 1e-13, 1.0);
    let errs: Vec<f64> = dts
        .iter()
        .map(|&dt| max_diff(endpoint(method, s0, dt, 1e-12, 1.0), reference))
        .collect();
    errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[test]
fn rk4_is_fourth_order() {
    let orders = observed_orders(Method::Rk4Fixed, &[0.02, 0.01, 0.005]);
    for p in &orders {
        assert!((p - 4.0).abs() <= 0.3, "{orders:?}");
    }
}

#[test]
fn abm54_is_at_least_fourth_order() {
    let orders = observed_orders(Method::Abm54Pc, &[0.02, 0.01, 0.005]);
    for p in &orders {
        assert!(*p >= 4.0, "{orders:?}");
    }
}

fn run(method: Method, s0: StateVec, t_end: f64) -> Trajectory {
    let spec = SolverSpec::new(method, 1e-3).with_tolerances(1e-12, 1e-12);
    integrate(&LorenzParams::default(), s0, &spec, t_end).unwrap()
}

#[test]
fn schemes_agree_over_ten_time_units() {
    // the default initial condition; on-attractor starts amplify the
    // per-scheme truncation error past 1e-5 within ten time units
    let s0 = StateVec::new(1.0, 0.0, 0.0);
    let runs: Vec<Trajectory> = Method::ALL.iter().map(|&m| run(m, s0, 10.0)).collect();
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            let d = runs[i].max_abs_diff(&runs[j]);
            assert!(d <= 1e-5, "{:?} vs {:?}: {d:e}", Method::ALL[i], Method::ALL[j]);
        }
    }
    let abm_vs_dopri = runs[1].max_abs_diff(&runs[2]);
    assert!(abm_vs_dopri <= 1e-6, "{abm_vs_dopri:e}");
}

#[test]
fn rk4_and_abm_agree_over_five_time_units() {
    let s0 = on_attractor();
    let d = run(Method::Rk4Fixed, s0, 5.0).max_abs_diff(&run(Method::Abm54Pc, s0, 5.0));
    assert!(d <= 1e-6, "{d:e}");
}

#[test]
fn warmup_lands_on_attractor() {
    let s = on_attractor();
    assert!(s.z().abs() <= 50.0);
    assert!(s.x().abs() <= 25.0 && s.y().abs() <= 25.0);
}

#[test]
fn adaptive_self_convergence() {
    let s0 = on_attractor();
    let reference = endpoint(Method::Dopri54Adaptive, s0, 1e-2, 1e-14, 10.0);
    let loose = max_diff(endpoint(Method::Dopri54Adaptive, s0, 1e-2, 1e-8, 10.0), reference);
    let tight = max_diff(endpoint(Method::Dopri54Adaptive, s0, 1e-2, 1e-12, 10.0), reference);
    assert!(tight < loose, "tight {tight:e} loose {loose:e}");
}

fn method() -> impl Strategy<Value = Method> {
    prop::sample::select(Method::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn origin_is_preserved_exactly(
        m in method(),
        sigma in 0.1f64..20.0,
        rho in 0.1f64..50.0,
        beta in 0.1f64..5.0,
        dt in 1e-4f64..5e-2,
        t_end in 0.0f64..2.0,
    ) {
        let p = LorenzParams { sigma, rho_drive: rho, beta };
        let traj = integrate(&p, StateVec::ZERO, &SolverSpec::new(m, dt), t_end).unwrap();
        prop_assert!(traj.states.iter().all(|s| *s == StateVec::ZERO));
    }

    #[test]
    fn grid_has_floor_plus_one_samples(m in method(), steps in 0usize..400, dt in prop::sample::select(vec![1e-3, 2e-3, 1e-2])) {
        let t_end = steps as f64 * dt;
        let traj = integrate(&LorenzParams::default(), StateVec::new(1.0, 1.0, 1.0), &SolverSpec::new(m, dt), t_end).unwrap();
        prop_assert_eq!(traj.len(), steps + 1);
        prop_assert_eq!(traj.states[0], StateVec::new(1.0, 1.0, 1.0));
    }

    #[test]
    fn integration_is_deterministic(m in method(), x in -15.0f64..15.0, y in -20.0f64..20.0, z in 5.0f64..40.0) {
        let s0 = StateVec::new(x, y, z);
        let spec = SolverSpec::new(m, 1e-2);
        let a = integrate(&LorenzParams::default(), s0, &spec, 3.0).unwrap();
        let b = integrate(&LorenzParams::default(), s0, &spec, 3.0).unwrap();
        prop_assert_eq!(a, b);
    }
}
