//! Resolved run configuration: built-in defaults, then a JSON config file,
//! then command-line flags.

use std::path::Path;

use chaosrc_core::harness::SweepKind;
use chaosrc_core::ExperimentProfile;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

/// Settings for the cross-solver ground-truth audit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSettings {
    pub dt: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub horizon: f64,
}

impl Default for AuditSettings {
    fn default() -> Self {
        AuditSettings {
            dt: 1e-3,
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            horizon: 60.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenDataSettings {
    /// Trajectory length after warmup; `null` means training plus prediction span.
    pub horizon: Option<f64>,
}

/// Everything that determines a command's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub profile: ExperimentProfile,
    pub trials: usize,
    pub sweep: SweepKind,
    pub lambdas: Vec<f64>,
    pub radii: Vec<f64>,
    pub sizes: Vec<usize>,
    pub gen_data: GenDataSettings,
    pub audit: AuditSettings,
}

/// `10^e`, correctly rounded.
fn decade(e: i32) -> f64 {
    format!("1e{e}").parse().expect("valid literal")
}

/// λ from 1e-24 to 1 by decades.
pub fn default_lambdas() -> Vec<f64> {
    (-24..=0).map(decade).collect()
}

pub fn default_radii() -> Vec<f64> {
    let mut r = vec![0.0];
    r.extend((-5..=-1).map(decade));
    r.extend([0.2, 0.5, 1.0, 1.5, 2.0]);
    r
}

pub fn default_sizes() -> Vec<usize> {
    vec![50, 100, 200, 300, 400, 600, 1000]
}

impl RunConfig {
    pub fn defaults(profile: ExperimentProfile) -> Self {
        RunConfig {
            profile,
            trials: 20,
            sweep: SweepKind::Lambda,
            lambdas: default_lambdas(),
            radii: default_radii(),
            sizes: default_sizes(),
            gen_data: GenDataSettings::default(),
            audit: AuditSettings::default(),
        }
    }

    /// Defaults for the named profile with an optional JSON patch on top. A
    /// top-level `"base"` key in the patch picks the profile unless `profile`
    /// is given explicitly.
    pub fn resolve(profile: Option<&str>, patch: Option<Value>) -> Result<Self, CliError> {
        let mut patch = match patch {
            None => Value::Object(Default::default()),
            Some(v @ Value::Object(_)) => v,
            Some(_) => return Err(CliError::Config("config file must hold a JSON object".into())),
        };
        let base = match patch.as_object_mut().and_then(|m| m.remove("base")) {
            None => None,
            Some(Value::String(s)) => Some(s),
            Some(other) => return Err(CliError::Config(format!("`base` must be a profile name, got {other}"))),
        };
        let name = profile.map(str::to_owned).or(base).unwrap_or_else(|| "desk".into());
        let prof = ExperimentProfile::by_name(&name)
            .ok_or_else(|| CliError::Config(format!("unknown profile `{name}` (expected `desk` or `paper`)")))?;
        let mut value = serde_json::to_value(Self::defaults(prof)).expect("defaults serialize");
        deep_merge(&mut value, patch);
        serde_json::from_value(value).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn load(profile: Option<&str>, path: Option<&Path>) -> Result<Self, CliError> {
        let patch = match path {
            None => None,
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                Some(
                    serde_json::from_str(&text)
                        .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
                )
            }
        };
        Self::resolve(profile, patch)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.profile.validate()?;
        let bad = |m: &str| Err(CliError::Config(m.into()));
        if self.lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return bad("lambdas must be finite and >= 0");
        }
        if self.radii.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return bad("radii must be finite and >= 0");
        }
        if self.sizes.contains(&0) {
            return bad("sizes must be positive");
        }
        let a = &self.audit;
        if !(a.dt > 0.0 && a.horizon > 0.0 && a.abs_tol > 0.0 && a.rel_tol > 0.0) {
            return bad("audit.dt, audit.horizon and the audit tolerances must be > 0");
        }
        if let Some(h) = self.gen_data.horizon {
            if !(h >= 0.0 && h.is_finite()) {
                return bad("gen_data.horizon must be >= 0");
            }
        }
        Ok(())
    }
}

/// Recursive object merge; any non-object value in `patch` replaces the
/// target. A tagged object whose `kind` changes is replaced whole, so fields of
/// the old variant do not leak into the new one.
pub fn deep_merge(target: &mut Value, patch: Value) {
    match (target, patch) {
        (Value::Object(t), Value::Object(p)) => {
            let kind_changes = matches!((t.get("kind"), p.get("kind")), (Some(a), Some(b)) if a != b);
            if kind_changes {
                *t = p;
                return;
            }
            for (k, v) in p {
                match t.get_mut(&k) {
                    Some(slot) => deep_merge(slot, v),
                    None => {
                        t.insert(k, v);
                    }
                }
            }
        }
        (t, p) => *t = p,
    }
}
