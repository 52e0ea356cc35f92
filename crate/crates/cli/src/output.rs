//! CSV and JSON writers. Floats in CSV use 17 significant digits, absent
//! values are empty cells, line endings are LF.

use std::fmt::Write as _;
use std::path::Path;

use chaosrc_core::harness::{ScreenResult, SweepResult};
use chaosrc_core::lorenz::fmt_sig17;
use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

fn opt(v: Option<f64>) -> String {
    v.map(fmt_sig17).unwrap_or_default()
}

fn axis_value(name: &str, v: f64) -> String {
    if name == "n" {
        format!("{}", v as u64)
    } else {
        fmt_sig17(v)
    }
}

pub const TRIAL_COLUMNS: [&str; 10] = [
    "trial_index",
    "seed",
    "vpt_rc",
    "vpt_benchmark",
    "ratio",
    "slope_rc",
    "slope_benchmark",
    "early_estimate",
    "diverged",
    "exceeds_vgtt",
];

/// Long format: one row per trial, axis values repeated on every row.
pub fn sweep_csv(sweep: &SweepResult) -> String {
    let mut out = String::new();
    out.push_str("cell_id");
    for axis in &sweep.axes {
        out.push(',');
        out.push_str(&axis.name);
    }
    for c in TRIAL_COLUMNS {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for cell in &sweep.cells {
        let coords: Vec<String> = sweep
            .axes
            .iter()
            .zip(&cell.summary.coords)
            .map(|(a, v)| axis_value(&a.name, *v))
            .collect();
        for t in &cell.trials {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                cell.summary.cell_id,
                coords.join(","),
                t.trial_index,
                t.seed,
                fmt_sig17(t.vpt_rc),
                fmt_sig17(t.vpt_benchmark),
                opt(t.ratio()),
                opt(t.slope_rc),
                opt(t.slope_benchmark),
                opt(t.early_estimate),
                t.diverged,
                t.exceeds_vgtt
            );
        }
    }
    out
}

pub fn screen_csv(screen: &ScreenResult) -> String {
    let mut out = String::from("rank,input_index,lambda,mean_early_error,mean_early_estimate\n");
    for e in &screen.ranking {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            e.rank,
            e.input_index,
            fmt_sig17(e.lambda),
            fmt_sig17(e.mean_early_error),
            opt(e.mean_early_estimate)
        );
    }
    out
}

/// Aggregate document for `run` and `sweep`.
#[derive(Serialize)]
pub struct SweepDocument<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub kind: chaosrc_core::harness::SweepKind,
    pub axes: &'a [chaosrc_core::harness::SweepAxis],
    pub trials_per_cell: usize,
    pub vgtt: &'a chaosrc_core::VptResult,
    pub cells: Vec<&'a chaosrc_core::harness::CellSummary>,
    pub config: &'a RunConfig,
}

impl<'a> SweepDocument<'a> {
    pub fn new(command: &'static str, sweep: &'a SweepResult, config: &'a RunConfig) -> Self {
        SweepDocument {
            tool: "chaosrc",
            version: chaosrc_core::VERSION,
            command,
            kind: sweep.kind,
            axes: &sweep.axes,
            trials_per_cell: sweep.trials_per_cell,
            vgtt: &sweep.vgtt,
            cells: sweep.cells.iter().map(|c| &c.summary).collect(),
            config,
        }
    }
}

/// Document with tool metadata and the resolved configuration around a payload.
#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    #[serde(flatten)]
    pub payload: &'a T,
    pub config: &'a RunConfig,
}

impl<'a, T: Serialize> Envelope<'a, T> {
    pub fn new(command: &'static str, payload: &'a T, config: &'a RunConfig) -> Self {
        Envelope {
            tool: "chaosrc",
            version: chaosrc_core::VERSION,
            command,
            payload,
            config,
        }
    }
}

pub fn json_string<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("output serializes") + "\n"
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<String, CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
    Ok(name.to_owned())
}
