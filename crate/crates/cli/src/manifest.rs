//! Per-command record written next to the outputs, once before the work
//! starts and again when it ends.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::CliError;

pub const MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    GenData,
    Vgtt,
    Run,
    Sweep,
    Screen,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::GenData => "gen-data",
            CommandKind::Vgtt => "vgtt",
            CommandKind::Run => "run",
            CommandKind::Sweep => "sweep",
            CommandKind::Screen => "screen",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: CommandKind,
    pub config: RunConfig,
    pub out_dir: PathBuf,
    /// Pool width used; it has no effect on the outputs.
    pub workers: usize,
    pub status: Status,
    pub started_unix_ms: u64,
    pub finished_unix_ms: Option<u64>,
    pub elapsed_seconds: Option<f64>,
    /// File names inside `out_dir`.
    pub outputs: Vec<String>,
    pub error: Option<String>,
    pub replayed_from: Option<PathBuf>,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl RunManifest {
    pub fn start(command: CommandKind, config: RunConfig, out_dir: &Path, workers: usize) -> Self {
        RunManifest {
            tool: "chaosrc".into(),
            version: chaosrc_core::VERSION.into(),
            command,
            config,
            out_dir: out_dir.to_path_buf(),
            workers,
            status: Status::Running,
            started_unix_ms: now_ms(),
            finished_unix_ms: None,
            elapsed_seconds: None,
            outputs: Vec::new(),
            error: None,
            replayed_from: None,
        }
    }

    pub fn finish(&mut self, outcome: Result<Vec<String>, &CliError>) {
        let end = now_ms();
        self.finished_unix_ms = Some(end);
        self.elapsed_seconds = Some(end.saturating_sub(self.started_unix_ms) as f64 / 1000.0);
        match outcome {
            Ok(outputs) => {
                self.status = Status::Completed;
                self.outputs = outputs;
            }
            Err(e) => {
                self.status = Status::Failed;
                self.error = Some(e.to_string());
            }
        }
    }

    pub fn path(&self) -> PathBuf {
        self.out_dir.join(MANIFEST_FILE)
    }

    pub fn write(&self) -> Result<(), CliError> {
        let path = self.path();
        let text = serde_json::to_string_pretty(self).expect("manifest serializes") + "\n";
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}
