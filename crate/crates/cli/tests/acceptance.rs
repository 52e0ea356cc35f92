//! Acceptance suite. Runs every criterion in sequence (so runtime bounds are
//! measured without contention), prints one PASS/FAIL line per criterion and
//! fails if any criterion fails.
//!
//! cargo test --release -p chaosrc-cli --test acceptance -- --nocapture

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use chaosrc_core::esn::Activation;
use chaosrc_core::harness::{early_vpt_screen, run_lambda_sweep, run_radius_size_sweep, run_vgtt_audit, SweepResult};
use chaosrc_core::lorenz::{attractor_warmup, integrate, LorenzParams, Method, SolverSpec, StateVec};
use chaosrc_core::metrics::{log_error_slope, normalized_error_series, vpt, ErrorSeries};
use chaosrc_core::numerics::{ridge_solve, spearman, DenseMat};
use chaosrc_core::{ExperimentProfile, Trajectory, LORENZ_LYAPUNOV_EXPONENT as LYAP};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    id: &'static str,
    pass: bool,
    detail: String,
}

struct Report(Vec<Verdict>);

impl Report {
    fn record(&mut self, id: &'static str, pass: bool, detail: String) {
        let line = format!("criterion {id:<3} {}  {detail}", if pass { "PASS" } else { "FAIL" });
        println!("{line}");
        self.0.push(Verdict { id, pass, detail });
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn endpoint(method: Method, s0: StateVec, dt: f64, tol: f64) -> StateVec {
    let spec = SolverSpec::new(method, dt).with_tolerances(tol, tol);
    *integrate(&LorenzParams::default(), s0, &spec, 1.0).unwrap().last().unwrap()
}

fn integrator_orders(r: &mut Report) {
    let (orders, took) = timed(|| {
        let s0 = attractor_warmup(
            &LorenzParams::default(),
            StateVec::new(1.0, 0.0, 0.0),
            &SolverSpec::new(Method::Rk4Fixed, 1e-3),
            20.0,
        )
        .unwrap();
        let reference = endpoint(Method::Dopri54Adaptive, s0, 1e-3, 1e-13);
        let dts = [0.02, 0.01, 0.005];
        let order = |m: Method| -> Vec<f64> {
            let errs: Vec<f64> = dts.iter().map(|&dt| (endpoint(m, s0, dt, 1e-12) - reference).max_abs()).collect();
            errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
        };
        (order(Method::Rk4Fixed), order(Method::Abm54Pc))
    });
    let (rk4, abm) = orders;
    let pass = rk4.iter().all(|p| (p - 4.0).abs() <= 0.3) && abm.iter().all(|p| *p >= 4.0) && took.as_secs_f64() < 10.0;
    r.record(
        "1",
        pass,
        format!("RK4 orders {rk4:.3?}, ABM54 orders {abm:.3?}, {:.2} s", took.as_secs_f64()),
    );
}

fn vgtt_audit(r: &mut Report) {
    let lorenz = LorenzParams::default();
    let spec = SolverSpec::new(Method::Abm54Pc, 1e-3);
    let s0 = attractor_warmup(&lorenz, StateVec::new(1.0, 0.0, 0.0), &spec, 20.0).unwrap();
    let audit = |dt: f64, tol: f64| run_vgtt_audit(&lorenz, s0, dt, tol, tol, 60.0, 0.4, LYAP).unwrap().result;
    let (base, took) = timed(|| audit(1e-3, 1e-12));
    let tighter = [audit(1e-3, 1e-13), audit(1e-3, 1e-14)];
    let finer = audit(5e-4, 1e-12);
    let v = base.vpt_lyap;
    let stable = tighter.iter().chain([&finer]).all(|t| t.vpt_lyap >= 0.8 * v);
    let pass = base.crossed && (20.0..=70.0).contains(&v) && took.as_secs_f64() < 30.0 && stable;
    r.record(
        "2",
        pass,
        format!(
            "VGTT {v:.3} Lyapunov times in {:.2} s; tol 1e-13 {:.3}, tol 1e-14 {:.3}, dt 5e-4 {:.3}",
            took.as_secs_f64(),
            tighter[0].vpt_lyap,
            tighter[1].vpt_lyap,
            finer.vpt_lyap
        ),
    );
}

fn na(m: &DenseMat) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.data())
}

fn ridge_oracles(r: &mut Report) {
    let (worst, took) = timed(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut rand_mat = |rows, cols| DenseMat::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
        let mut min_norm_err: f64 = 0.0;
        for (n, t) in [(5, 20), (20, 5)] {
            let (s, z) = (rand_mat(n, t), rand_mat(3, t));
            let w = na(&ridge_solve(&s, &z, 0.0).unwrap());
            let (sn, zn) = (na(&s), na(&z));
            // minimum-norm least squares through the normal equations of the full-rank side
            let oracle = if n <= t {
                (&sn * sn.transpose()).cholesky().unwrap().solve(&(&sn * zn.transpose())).transpose()
            } else {
                (&sn * (sn.transpose() * &sn).cholesky().unwrap().solve(&zn.transpose())).transpose()
            };
            min_norm_err = min_norm_err.max((&w - &oracle).norm() / oracle.norm());
        }
        let mut stationarity: f64 = 0.0;
        for lambda in [1e-6, 1e-2, 1.0] {
            let (s, z) = (rand_mat(20, 50), rand_mat(3, 50));
            let w = na(&ridge_solve(&s, &z, lambda).unwrap());
            let (sn, zn) = (na(&s), na(&z));
            let grad = (&w * &sn - &zn) * sn.transpose() + &w * lambda;
            stationarity = stationarity.max(grad.norm() / (&zn * sn.transpose()).norm());
        }
        (min_norm_err, stationarity)
    });
    let (e, g) = worst;
    r.record(
        "3",
        e <= 1e-8 && g <= 1e-8 && took.as_secs_f64() < 1.0,
        format!("λ=0 vs oracle {e:.2e}, stationarity {g:.2e}, {:.3} s", took.as_secs_f64()),
    );
}

fn metric_examples(r: &mut Report) {
    let truth = Trajectory::new(1.0, 0.0, (0..4).map(|k| StateVec::new(if k % 2 == 0 { 1.0 } else { -1.0 }, 0.0, 0.0)).collect());
    let zero = Trajectory::new(1.0, 0.0, vec![StateVec::ZERO; 4]);
    let e = normalized_error_series(&truth, &zero).unwrap();
    let alternating = e.values.iter().all(|&v| v == 1.0);
    let v = vpt(&ErrorSeries::new(1.0, 0.0, vec![0.1, 0.3, 0.5]), 0.4, LYAP);
    let crossing = v.crossed && v.t_raw == 2.0 && v.vpt_lyap == 2.0 * LYAP && (v.vpt_lyap - 1.8112).abs() < 1e-15;
    let series: Vec<f64> = (0..2000).map(|k| 1e-9 * (0.9 * k as f64 * 0.01).exp()).collect();
    let slope = log_error_slope(&ErrorSeries::new(0.01, 0.0, series), 1e-10, 1e-2).unwrap().slope;
    let slope_ok = (slope - 0.9).abs() <= 1e-9;
    r.record(
        "4",
        alternating && crossing && slope_ok,
        format!("E {:?}, VPT t_raw {} → {} Lyapunov times, slope {slope:.12}", e.values, v.t_raw, v.vpt_lyap),
    );
}

fn cell(s: &SweepResult, lambda: f64) -> &chaosrc_core::harness::CellSummary {
    &s.cells.iter().find(|c| c.summary.coords[0] == lambda).unwrap().summary
}

fn end_to_end_and_lambda(r: &mut Report, desk: &ExperimentProfile) -> SweepResult {
    let (sweep, took) = timed(|| run_lambda_sweep(desk, &[0.0, 1e-8, 1e-2], 20, workers()).unwrap());
    let c0 = cell(&sweep, 0.0);
    r.record(
        "5",
        c0.mean_vpt_rc >= 3.0 && c0.mean_vpt_benchmark >= c0.mean_vpt_rc,
        format!(
            "λ=0, 20 trials: RC {:.3} ± {:.3}, benchmark {:.3} ± {:.3} Lyapunov times",
            c0.mean_vpt_rc, c0.std_vpt_rc, c0.mean_vpt_benchmark, c0.std_vpt_benchmark
        ),
    );
    let (small, large) = (cell(&sweep, 1e-8), cell(&sweep, 1e-2));
    let ratio = small.ratio.unwrap_or(0.0);
    r.record(
        "6",
        small.mean_vpt_rc > large.mean_vpt_rc && ratio >= 0.4 && took.as_secs_f64() < 600.0,
        format!(
            "mean RC VPT λ=1e-8 {:.3} vs λ=1e-2 {:.3}; ratio at 1e-8 {ratio:.3}; sweep of 3 λ x 20 trials {:.1} s",
            small.mean_vpt_rc,
            large.mean_vpt_rc,
            took.as_secs_f64()
        ),
    );
    sweep
}

fn slopes(r: &mut Report, desk: &ExperimentProfile) {
    let mut p = desk.clone();
    p.reservoir.n = 400;
    p.reservoir.activation = Activation::Swish { beta: 1.0 };
    p.lambda = 0.0;
    let sweep = run_lambda_sweep(&p, &[0.0], 10, workers()).unwrap();
    let trials = &sweep.cells[0].trials;
    let rc: Vec<f64> = trials.iter().filter_map(|t| t.slope_rc).collect();
    let bm: Vec<f64> = trials.iter().filter_map(|t| t.slope_benchmark).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mr, mb) = (mean(&rc), mean(&bm));
    let rel = (mr - mb).abs() / ((mr + mb) / 2.0);
    let band = 0.5..=1.1;
    r.record(
        "7",
        rc.len() == 10 && bm.len() == 10 && band.contains(&mr) && band.contains(&mb) && rel <= 0.15,
        format!(
            "swish N=400 λ=0, 10 trials: slope RC {mr:.4} ({} fits), benchmark {mb:.4} ({} fits), difference {:.1}% (log10 error per time unit)",
            rc.len(),
            bm.len(),
            100.0 * rel
        ),
    );
}

fn early_screen(r: &mut Report, desk: &ExperimentProfile, sweep: &SweepResult) {
    let trials = &sweep.cells.iter().find(|c| c.summary.coords[0] == desk.lambda).unwrap().trials;
    let (est, vpts): (Vec<f64>, Vec<f64>) = trials
        .iter()
        .filter_map(|t| t.early_estimate.map(|e| (e, t.vpt_rc)))
        .unzip();
    let rho = spearman(&est, &vpts).unwrap();
    let screen = early_vpt_screen(desk, &[1e-8, 1e-2], 20, workers()).unwrap();
    let screen_winner = screen.ranking[0].lambda;
    let sweep_winner = if cell(sweep, 1e-8).mean_vpt_rc >= cell(sweep, 1e-2).mean_vpt_rc { 1e-8 } else { 1e-2 };
    r.record(
        "8",
        est.len() == 20 && rho >= 0.5 && screen_winner == sweep_winner,
        format!(
            "Spearman(early estimate, VPT) at λ={} over {} trials = {rho:.3}; screen winner {screen_winner:e}, sweep winner {sweep_winner:e}",
            desk.lambda,
            est.len()
        ),
    );
}

fn radius_regimes(r: &mut Report, desk: &ExperimentProfile) {
    let sweep = run_radius_size_sweep(desk, &[1e-4, 2.0], &[300], 10, workers()).unwrap();
    let (small, large) = (&sweep.cells[0].summary, &sweep.cells[1].summary);
    let unstable = large.diverged_fraction > 0.0 || large.mean_vpt_rc < 1.0;
    r.record(
        "9",
        small.mean_vpt_rc > large.mean_vpt_rc && unstable,
        format!(
            "N=300, 10 trials: radius 1e-4 {:.3} ± {:.3} vs radius 2 {:.3} ± {:.3}; radius-2 diverged fraction {:.2}, instability evidence (diverged or mean < 1): {unstable}",
            small.mean_vpt_rc, small.std_vpt_rc, large.mean_vpt_rc, large.std_vpt_rc, large.diverged_fraction
        ),
    );
}

fn chaosrc(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_chaosrc"))
        .env_remove("CHAOSRC_OUT")
        .args(args)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn data_files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok()?.file_name().into_string().ok())
        .filter(|n| (n.ends_with(".csv") || n.ends_with(".json")) && n != "run_manifest.json")
        .collect();
    names.sort();
    names
}

fn determinism(r: &mut Report) {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"trials": 3, "profile": {"train_time": 40, "predict_time": 8, "reservoir": {"n": 80, "washout_steps": 200}}}"#,
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    let runs: [(&str, Vec<&str>); 6] = [
        ("gen-data", vec!["gen-data", "--horizon", "20"]),
        ("vgtt", vec!["vgtt", "--horizon", "30"]),
        ("run", vec!["run", "--lambda", "1e-8"]),
        ("sweep-lambda", vec!["sweep", "--lambdas", "0,1e-8,1e-2"]),
        ("sweep-grid", vec!["sweep", "--kind", "radius-size", "--radii", "1e-4,0.5,2", "--sizes", "40,80"]),
        ("screen", vec!["screen", "--lambdas", "1e-10,1e-8,1e-4,1e-2"]),
    ];
    let mut problems = Vec::new();
    let mut compared = 0;
    for (name, args) in &runs {
        let first = tmp.path().join(format!("{name}-w1"));
        let mut full = vec!["--config", c, "--workers", "1", "--out", first.to_str().unwrap()];
        full.extend(args.iter().copied());
        if !chaosrc(&full) {
            problems.push(format!("{name} failed"));
            continue;
        }
        let manifest = first.join("run_manifest.json");
        for w in ["2", "4"] {
            let again = tmp.path().join(format!("{name}-replay-w{w}"));
            if !chaosrc(&["replay", manifest.to_str().unwrap(), "--workers", w, "--out", again.to_str().unwrap()]) {
                problems.push(format!("{name} replay failed"));
                continue;
            }
            let files = data_files(&first);
            if files != data_files(&again) || files.is_empty() {
                problems.push(format!("{name}: file sets differ"));
            }
            for f in files {
                compared += 1;
                if std::fs::read(first.join(&f)).unwrap() != std::fs::read(again.join(&f)).unwrap() {
                    problems.push(format!("{name}/{f} differs with {w} workers"));
                }
            }
        }
    }
    r.record(
        "10",
        problems.is_empty(),
        format!("{compared} replayed CSV/JSON files compared byte for byte; problems: {problems:?}"),
    );
}

#[test]
fn acceptance() {
    let desk = ExperimentProfile::desk();
    let mut r = Report(Vec::new());
    integrator_orders(&mut r);
    vgtt_audit(&mut r);
    ridge_oracles(&mut r);
    metric_examples(&mut r);
    let sweep = end_to_end_and_lambda(&mut r, &desk);
    slopes(&mut r, &desk);
    early_screen(&mut r, &desk, &sweep);
    radius_regimes(&mut r, &desk);
    determinism(&mut r);

    let failed: Vec<String> = r.0.iter().filter(|v| !v.pass).map(|v| format!("{}: {}", v.id, v.detail)).collect();
    println!("{} of {} criteria passed", r.0.len() - failed.len(), r.0.len());
    assert!(failed.is_empty(), "failing criteria:\n{}", failed.join("\n"));
}
