//! Command bodies. Each one takes a resolved configuration, writes its files
//! into `out_dir` and returns a human-readable report.

use std::fmt::Write as _;
use std::path::Path;

use chaosrc_core::harness::{
    early_vpt_screen, run_lambda_sweep, run_radius_size_sweep, run_vgtt_audit, SweepKind, SweepResult,
};
use chaosrc_core::lorenz::{attractor_warmup, integrate, LorenzParams, SolverSpec, StateVec};
use serde::Serialize;

use crate::config::RunConfig;
use crate::manifest::CommandKind;
use crate::output::{json_string, screen_csv, sweep_csv, write_file, Envelope, SweepDocument};
use crate::CliError;

pub struct CommandOutput {
    pub report: String,
    /// File names written inside the output directory.
    pub outputs: Vec<String>,
}

pub fn execute(kind: CommandKind, cfg: &RunConfig, out_dir: &Path, workers: usize) -> Result<CommandOutput, CliError> {
    match kind {
        CommandKind::GenData => gen_data(cfg, out_dir),
        CommandKind::Vgtt => vgtt(cfg, out_dir),
        CommandKind::Run => run(cfg, out_dir, workers),
        CommandKind::Sweep => sweep(cfg, out_dir, workers),
        CommandKind::Screen => screen(cfg, out_dir, workers),
    }
}

#[derive(Serialize)]
struct TrajectorySidecar<'a> {
    lorenz: &'a LorenzParams,
    solver: &'a SolverSpec,
    initial_state: StateVec,
    warmup_time: f64,
    start_state: StateVec,
    horizon: f64,
    samples: usize,
    columns: [&'static str; 4],
}

fn gen_data(cfg: &RunConfig, out_dir: &Path) -> Result<CommandOutput, CliError> {
    let p = &cfg.profile;
    let horizon = cfg.gen_data.horizon.unwrap_or(p.train_time + p.predict_time);
    let s0 = attractor_warmup(&p.lorenz, p.initial_state, &p.solver, p.warmup_time)?;
    let traj = integrate(&p.lorenz, s0, &p.solver, horizon)?;
    let sidecar = TrajectorySidecar {
        lorenz: &p.lorenz,
        solver: &p.solver,
        initial_state: p.initial_state,
        warmup_time: p.warmup_time,
        start_state: s0,
        horizon,
        samples: traj.len(),
        columns: ["t", "x", "y", "z"],
    };
    let outputs = vec![
        write_file(out_dir, "trajectory.csv", &traj.to_csv())?,
        write_file(out_dir, "trajectory.json", &json_string(&Envelope::new("gen-data", &sidecar, cfg)))?,
    ];
    let report = format!(
        "{} samples over {horizon} time units with {} at dt {}\n",
        traj.len(),
        p.solver.method.name(),
        p.solver.dt
    );
    Ok(CommandOutput { report, outputs })
}

fn vgtt(cfg: &RunConfig, out_dir: &Path) -> Result<CommandOutput, CliError> {
    let p = &cfg.profile;
    let a = &cfg.audit;
    let warm = SolverSpec::new(p.solver.method, a.dt).with_tolerances(a.abs_tol, a.rel_tol);
    let s0 = attractor_warmup(&p.lorenz, p.initial_state, &warm, p.warmup_time)?;
    let audit = run_vgtt_audit(
        &p.lorenz,
        s0,
        a.dt,
        a.abs_tol,
        a.rel_tol,
        a.horizon,
        p.metrics.threshold,
        p.metrics.lyapunov_exponent,
    )?;
    let mut report = format!("{:<36} {:>12} {:>12} {:>12}\n", "pair", "forward_t", "backward_t", "lyap_times");
    for pair in &audit.pairs {
        let _ = writeln!(
            report,
            "{:<36} {:>12.4} {:>12.4} {:>12.4}",
            format!("{} / {}", pair.first.name(), pair.second.name()),
            pair.forward.t_raw,
            pair.backward.t_raw,
            pair.vpt_lyap
        );
    }
    let r = &audit.result;
    let _ = writeln!(
        report,
        "VGTT {}{:.4} Lyapunov times (dt {}, tol {:e}/{:e}, horizon {})",
        if r.crossed { "" } else { ">= " },
        r.vpt_lyap,
        a.dt,
        a.abs_tol,
        a.rel_tol,
        a.horizon
    );
    let outputs = vec![write_file(out_dir, "vgtt.json", &json_string(&Envelope::new("vgtt", &audit, cfg)))?];
    Ok(CommandOutput { report, outputs })
}

fn summary_lines(sweep: &SweepResult) -> String {
    let mut out = String::new();
    for cell in &sweep.cells {
        let s = &cell.summary;
        let coords: Vec<String> = sweep
            .axes
            .iter()
            .zip(&s.coords)
            .map(|(a, v)| format!("{}={v:e}", a.name))
            .collect();
        let _ = writeln!(
            out,
            "[{}] {}  rc {:.3} ± {:.3}  benchmark {:.3} ± {:.3}  ratio {}  diverged {:.0}%  over_vgtt {}",
            s.cell_id,
            coords.join(" "),
            s.mean_vpt_rc,
            s.std_vpt_rc,
            s.mean_vpt_benchmark,
            s.std_vpt_benchmark,
            s.ratio.map_or("-".to_string(), |r| format!("{r:.3}")),
            100.0 * s.diverged_fraction,
            s.exceeds_vgtt_count
        );
    }
    let _ = writeln!(
        out,
        "VPT in Lyapunov times; solver-agreement limit (VGTT) {}{:.3}",
        if sweep.vgtt.crossed { "" } else { ">= " },
        sweep.vgtt.vpt_lyap
    );
    out
}

fn write_sweep(
    command: &'static str,
    stem: &str,
    sweep: &SweepResult,
    cfg: &RunConfig,
    out_dir: &Path,
) -> Result<Vec<String>, CliError> {
    Ok(vec![
        write_file(out_dir, &format!("{stem}.csv"), &sweep_csv(sweep))?,
        write_file(out_dir, &format!("{stem}.json"), &json_string(&SweepDocument::new(command, sweep, cfg)))?,
    ])
}

fn run(cfg: &RunConfig, out_dir: &Path, workers: usize) -> Result<CommandOutput, CliError> {
    let sweep = run_lambda_sweep(&cfg.profile, &[cfg.profile.lambda], cfg.trials, workers)?;
    let outputs = write_sweep("run", "trials", &sweep, cfg, out_dir)?;
    Ok(CommandOutput {
        report: summary_lines(&sweep),
        outputs,
    })
}

fn sweep(cfg: &RunConfig, out_dir: &Path, workers: usize) -> Result<CommandOutput, CliError> {
    let sweep = match cfg.sweep {
        SweepKind::Lambda => run_lambda_sweep(&cfg.profile, &cfg.lambdas, cfg.trials, workers)?,
        SweepKind::RadiusSize => run_radius_size_sweep(&cfg.profile, &cfg.radii, &cfg.sizes, cfg.trials, workers)?,
    };
    let outputs = write_sweep("sweep", "sweep", &sweep, cfg, out_dir)?;
    Ok(CommandOutput {
        report: summary_lines(&sweep),
        outputs,
    })
}

fn screen(cfg: &RunConfig, out_dir: &Path, workers: usize) -> Result<CommandOutput, CliError> {
    let result = early_vpt_screen(&cfg.profile, &cfg.lambdas, cfg.trials, workers)?;
    let mut report = format!(
        "{:>4} {:>12} {:>16} {:>16}\n",
        "rank", "lambda", "early_error", "est_vpt_lyap"
    );
    for e in &result.ranking {
        let _ = writeln!(
            report,
            "{:>4} {:>12e} {:>16.6e} {:>16}",
            e.rank,
            e.lambda,
            e.mean_early_error,
            e.mean_early_estimate.map_or("-".to_string(), |v| format!("{v:.3}"))
        );
    }
    let outputs = vec![
        write_file(out_dir, "screen.csv", &screen_csv(&result))?,
        write_file(out_dir, "screen.json", &json_string(&Envelope::new("screen", &result, cfg)))?,
    ];
    Ok(CommandOutput { report, outputs })
}
