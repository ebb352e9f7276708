//! Plain-text checkpoints.
//!
//! A header of `key = value` lines records the run identity (discretization,
//! model, seed, trajectory) and the step index; the spectral coefficients
//! follow one per line with 17 significant digits, which restores every
//! `f64` exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::config::fmt_f64;
use crate::error::{Error, Result};
use crate::grid::SpectralField;
use crate::integrator::{DriftSpec, SchemeParams, SchemeState};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "# sche checkpoint";

/// Everything a resumed run must agree on.
#[derive(Debug, Clone, PartialEq)]
pub struct RunIdentity {
    pub n_modes: usize,
    pub tau: f64,
    pub sigma: f64,
    pub drift: DriftSpec,
    pub validation: bool,
    pub seed: u64,
    pub trajectory_id: u64,
}

impl RunIdentity {
    pub fn of(params: &SchemeParams, seed: u64, trajectory_id: u64) -> Self {
        RunIdentity {
            n_modes: params.n_modes(),
            tau: params.tau(),
            sigma: params.sigma(),
            drift: params.drift(),
            validation: params.validation_mode(),
            seed,
            trajectory_id,
        }
    }

    fn mismatches(&self, other: &RunIdentity) -> Vec<String> {
        let mut out = Vec::new();
        let mut cmp = |name: &str, a: String, b: String| {
            if a != b {
                out.push(format!("{name}: checkpoint has {a}, run has {b}"));
            }
        };
        cmp("n_modes", self.n_modes.to_string(), other.n_modes.to_string());
        cmp("tau", fmt_f64(self.tau), fmt_f64(other.tau));
        cmp("sigma", fmt_f64(self.sigma), fmt_f64(other.sigma));
        cmp("a0", fmt_f64(self.drift.a0), fmt_f64(other.drift.a0));
        cmp("a1", fmt_f64(self.drift.a1), fmt_f64(other.drift.a1));
        cmp("a2", fmt_f64(self.drift.a2), fmt_f64(other.drift.a2));
        cmp("a3", fmt_f64(self.drift.a3), fmt_f64(other.drift.a3));
        cmp("validation", self.validation.to_string(), other.validation.to_string());
        cmp("seed", self.seed.to_string(), other.seed.to_string());
        cmp("trajectory_id", self.trajectory_id.to_string(), other.trajectory_id.to_string());
        out
    }
}

pub fn encode(id: &RunIdentity, state: &SchemeState) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC}");
    let _ = writeln!(s, "version = {FORMAT_VERSION}");
    let _ = writeln!(s, "n_modes = {}", id.n_modes);
    let _ = writeln!(s, "tau = {}", fmt_f64(id.tau));
    let _ = writeln!(s, "sigma = {}", fmt_f64(id.sigma));
    let _ = writeln!(s, "a0 = {}", fmt_f64(id.drift.a0));
    let _ = writeln!(s, "a1 = {}", fmt_f64(id.drift.a1));
    let _ = writeln!(s, "a2 = {}", fmt_f64(id.drift.a2));
    let _ = writeln!(s, "a3 = {}", fmt_f64(id.drift.a3));
    let _ = writeln!(s, "validation = {}", id.validation);
    let _ = writeln!(s, "seed = {}", id.seed);
    let _ = writeln!(s, "trajectory_id = {}", id.trajectory_id);
    let _ = writeln!(s, "step = {}", state.step_index);
    let _ = writeln!(s, "mass0 = {:.16e}", state.mass0);
    let _ = writeln!(s, "coefficients = {}", state.coeffs.len());
    for c in &state.coeffs.0 {
        let _ = writeln!(s, "{c:.16e}");
    }
    s.push_str("end\n");
    s
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

/// Parses a checkpoint without checking it against a run.
pub fn decode(text: &str) -> Result<(RunIdentity, SchemeState)> {
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        return Err(bad("not a checkpoint file"));
    }
    let mut field = |key: &str| -> Result<String> {
        let line = lines.next().ok_or_else(|| bad(format!("truncated before `{key}`")))?;
        match line.split_once('=') {
            Some((k, v)) if k.trim() == key => Ok(v.trim().to_string()),
            _ => Err(bad(format!("expected `{key} = ...`, found `{line}`"))),
        }
    };
    fn num<T: std::str::FromStr>(key: &str, v: String) -> Result<T> {
        v.parse().map_err(|_| bad(format!("bad value for `{key}`: `{v}`")))
    }

    let version: u32 = num("version", field("version")?)?;
    if version != FORMAT_VERSION {
        return Err(bad(format!("version mismatch: file has {version}, expected {FORMAT_VERSION}")));
    }
    let id = RunIdentity {
        n_modes: num("n_modes", field("n_modes")?)?,
        tau: num("tau", field("tau")?)?,
        sigma: num("sigma", field("sigma")?)?,
        drift: DriftSpec {
            a0: num("a0", field("a0")?)?,
            a1: num("a1", field("a1")?)?,
            a2: num("a2", field("a2")?)?,
            a3: num("a3", field("a3")?)?,
        },
        validation: num("validation", field("validation")?)?,
        seed: num("seed", field("seed")?)?,
        trajectory_id: num("trajectory_id", field("trajectory_id")?)?,
    };
    let step: u64 = num("step", field("step")?)?;
    let mass0: f64 = num("mass0", field("mass0")?)?;
    let count: usize = num("coefficients", field("coefficients")?)?;
    if count != id.n_modes {
        return Err(bad(format!("{count} coefficients for n_modes = {}", id.n_modes)));
    }
    let mut coeffs = Vec::with_capacity(count);
    for k in 0..count {
        let line = lines
            .next()
            .ok_or_else(|| bad(format!("truncated: {k} of {count} coefficients present")))?;
        let c: f64 = num("coefficient", line.trim().to_string())?;
        coeffs.push(c);
    }
    match lines.next() {
        Some("end") => {}
        Some(other) => return Err(bad(format!("expected `end`, found `{other}`"))),
        None => return Err(bad("truncated: missing `end`")),
    }
    let state = SchemeState {
        step_index: step,
        coeffs: SpectralField(coeffs),
        mass0,
    };
    Ok((id, state))
}

pub fn write_checkpoint(path: &Path, id: &RunIdentity, state: &SchemeState) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, encode(id, state))?;
    Ok(())
}

/// Reads a checkpoint and checks it belongs to the run described by `expected`.
pub fn read_checkpoint(path: &Path, expected: &RunIdentity) -> Result<SchemeState> {
    let text = std::fs::read_to_string(path)?;
    let (id, state) = decode(&text)?;
    let diff = id.mismatches(expected);
    if !diff.is_empty() {
        return Err(bad(format!("parameter mismatch: {}", diff.join("; "))));
    }
    Ok(state)
}
