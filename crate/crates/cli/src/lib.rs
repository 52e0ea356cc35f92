//! `chaosrc` command-line driver.
//!
//! Every command resolves its configuration (built-in profile, then an
//! optional JSON file, then flags), writes `run_manifest.json` into the output
//! directory, does its work, and finalizes the manifest. `replay` re-runs a
//! command from a manifest.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure, 1 I/O.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use chaosrc_core::harness::SweepKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use config::RunConfig;
use manifest::{CommandKind, RunManifest};

pub const DEFAULT_OUT_DIR: &str = "chaosrc-out";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 1,
        }
    }
}

impl From<chaosrc_core::Error> for CliError {
    fn from(e: chaosrc_core::Error) -> Self {
        match e {
            chaosrc_core::Error::InvalidConfig(m) => CliError::Config(m),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "chaosrc", version, about = "Reservoir-computing forecasts of the Lorenz system")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON file patched onto the profile defaults.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Built-in profile.
    #[arg(long, global = true, value_parser = ["paper", "desk"])]
    pub profile: Option<String>,
    /// Base seed; trial i uses seed + i.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Trials per cell.
    #[arg(long, global = true, value_name = "N")]
    pub trials: Option<usize>,
    /// Worker threads (default: available cores). Outputs do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, env = "CHAOSRC_OUT", value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepArg {
    Lambda,
    RadiusSize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a ground-truth trajectory and write it as CSV with a JSON sidecar.
    GenData {
        /// Time span after warmup (default: training plus prediction span).
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Cross-solver agreement audit.
    Vgtt {
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        /// Absolute and relative tolerance of the adaptive scheme.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Repeated trials at one regularization value.
    Run {
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Regularization sweep or spectral-radius x size grid.
    Sweep {
        #[arg(long, value_enum)]
        kind: Option<SweepArg>,
        /// Comma-separated regularization values.
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
        /// Comma-separated spectral radii.
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<f64>>,
        /// Comma-separated reservoir sizes.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
    },
    /// Rank regularization values by the error a few steps into the forecast.
    Screen {
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
    },
    /// Re-run the command recorded in a manifest.
    Replay {
        manifest: PathBuf,
    },
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn resolve(cli: &Cli) -> Result<(CommandKind, RunConfig), CliError> {
    let g = &cli.global;
    let mut cfg = RunConfig::load(g.profile.as_deref(), g.config.as_deref())?;
    if let Some(seed) = g.seed {
        cfg.profile.base_seed = seed;
    }
    if let Some(t) = g.trials {
        cfg.trials = t;
    }
    let kind = match &cli.command {
        Command::GenData { horizon } => {
            if horizon.is_some() {
                cfg.gen_data.horizon = *horizon;
            }
            CommandKind::GenData
        }
        Command::Vgtt { horizon, dt, tol } => {
            if let Some(h) = horizon {
                cfg.audit.horizon = *h;
            }
            if let Some(dt) = dt {
                cfg.audit.dt = *dt;
            }
            if let Some(tol) = tol {
                cfg.audit.abs_tol = *tol;
                cfg.audit.rel_tol = *tol;
            }
            CommandKind::Vgtt
        }
        Command::Run { lambda } => {
            if let Some(l) = lambda {
                cfg.profile.lambda = *l;
            }
            CommandKind::Run
        }
        Command::Sweep {
            kind,
            lambdas,
            radii,
            sizes,
        } => {
            if let Some(k) = kind {
                cfg.sweep = match k {
                    SweepArg::Lambda => SweepKind::Lambda,
                    SweepArg::RadiusSize => SweepKind::RadiusSize,
                };
            }
            if let Some(v) = lambdas {
                cfg.lambdas = v.clone();
            }
            if let Some(v) = radii {
                cfg.radii = v.clone();
            }
            if let Some(v) = sizes {
                cfg.sizes = v.clone();
            }
            CommandKind::Sweep
        }
        Command::Screen { lambdas } => {
            if let Some(v) = lambdas {
                cfg.lambdas = v.clone();
            }
            CommandKind::Screen
        }
        Command::Replay { .. } => unreachable!("replay is resolved from its manifest"),
    };
    Ok((kind, cfg))
}

/// Run one command end to end, bracketing it with manifest writes.
pub fn execute_with_manifest(
    kind: CommandKind,
    cfg: RunConfig,
    out_dir: &Path,
    workers: usize,
    replayed_from: Option<PathBuf>,
) -> Result<(RunManifest, String), CliError> {
    cfg.validate()?;
    if workers == 0 {
        return Err(CliError::Config("--workers must be at least 1".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut manifest = RunManifest::start(kind, cfg, out_dir, workers);
    manifest.replayed_from = replayed_from;
    manifest.write()?;
    let result = commands::execute(kind, &manifest.config, out_dir, workers);
    match result {
        Ok(out) => {
            manifest.finish(Ok(out.outputs));
            manifest.write()?;
            Ok((manifest, out.report))
        }
        Err(e) => {
            manifest.finish(Err(&e));
            manifest.write()?;
            Err(e)
        }
    }
}

fn dispatch(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let workers = cli.global.workers.unwrap_or_else(default_workers);
    let (kind, cfg, out_dir, origin) = match &cli.command {
        Command::Replay { manifest } => {
            let g = &cli.global;
            if g.config.is_some() || g.profile.is_some() || g.seed.is_some() || g.trials.is_some() {
                return Err(CliError::Config(
                    "replay takes its configuration from the manifest; only --workers and --out apply".into(),
                ));
            }
            let m = RunManifest::read(manifest)?;
            let out = g.out.clone().unwrap_or_else(|| {
                let mut name = m.out_dir.file_name().unwrap_or_default().to_os_string();
                name.push("-replay");
                m.out_dir.with_file_name(name)
            });
            (m.command, m.config, out, Some(manifest.clone()))
        }
        _ => {
            let (kind, cfg) = resolve(&cli)?;
            let out = cli.global.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
            (kind, cfg, out, None)
        }
    };
    let (manifest, report) = execute_with_manifest(kind, cfg, &out_dir, workers, origin)?;
    let _ = write!(stdout, "{report}");
    let _ = writeln!(
        stdout,
        "{} finished in {:.2} s; outputs in {}",
        kind.name(),
        manifest.elapsed_seconds.unwrap_or(0.0),
        out_dir.display()
    );
    Ok(())
}

/// Parse `args` and run; returns the process exit code.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{text}");
            } else {
                let _ = write!(stderr, "{text}");
            }
            return code;
        }
    };
    match dispatch(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
