//! Flat `key = value` run configuration.
//!
//! Lines starting with `#` are comments. Every key may appear at most once;
//! unknown keys are errors. All problems in a file are reported together.
//!
//! Output files echo the canonical form of the configuration as `# key = value`
//! lines after a `# @sche` marker, so an output file can be passed back as
//! `--config` to re-run the experiment that produced it.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiments::Coupling;
use crate::integrator::{DriftSpec, InitialProfile};
use crate::observables::{Profile, TestFunctionSpec};

pub const ENV_PREFIX: &str = "SCHE_";
pub const HEADER_MARKER: &str = "# @sche";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    ConvergeTime,
    ConvergeSpace,
    Ergodic,
    Verify,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::ConvergeTime => "converge-time",
            Command::ConvergeSpace => "converge-space",
            Command::Ergodic => "ergodic",
            Command::Verify => "verify",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "simulate" => Command::Simulate,
            "converge-time" => Command::ConvergeTime,
            "converge-space" => Command::ConvergeSpace,
            "ergodic" => Command::Ergodic,
            "verify" => Command::Verify,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorChoice {
    Ensemble,
    Single,
    Both,
}

impl EstimatorChoice {
    fn as_str(&self) -> &'static str {
        match self {
            EstimatorChoice::Ensemble => "I",
            EstimatorChoice::Single => "II",
            EstimatorChoice::Both => "both",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub tau: Option<f64>,
    pub n_modes: Option<usize>,
    pub sigma: f64,
    pub drift: DriftSpec,
    pub validation: bool,
    pub initial: InitialProfile,
    pub t_final: Option<f64>,
    pub trajectories: u64,
    pub tau_ref: Option<f64>,
    pub taus: Vec<f64>,
    pub n_ref: Option<usize>,
    pub n_modes_list: Vec<usize>,
    pub check_every: u64,
    pub coupling: Coupling,
    pub snapshot_every: u64,
    pub initials: Vec<InitialProfile>,
    pub tests: Vec<TestFunctionSpec>,
    pub estimator: EstimatorChoice,
    pub t_ensemble: Option<f64>,
    pub ensemble_size: u64,
    pub burn_in: u64,
    pub record_every: u64,
    pub lf_radius: f64,
}

const KEYS: &[&str] = &[
    "command",
    "seed",
    "tau",
    "n_modes",
    "sigma",
    "a0",
    "a1",
    "a2",
    "a3",
    "validation",
    "initial",
    "t_final",
    "trajectories",
    "tau_ref",
    "taus",
    "n_ref",
    "n_modes_list",
    "check_every",
    "coupling",
    "snapshot_every",
    "initials",
    "tests",
    "estimator",
    "t_ensemble",
    "ensemble_size",
    "burn_in",
    "record_every",
    "lf_radius",
];

impl RunConfig {
    /// Defaults for `command`; required keys are left unset.
    pub fn defaults(command: Command) -> Self {
        let third = 1.0 / 3.0;
        RunConfig {
            command,
            seed: 0,
            tau: None,
            n_modes: None,
            sigma: 1.0,
            drift: DriftSpec::benchmark(),
            validation: false,
            initial: InitialProfile {
                terms: vec![(third, 0), (third, 1)],
            },
            t_final: None,
            trajectories: 100,
            tau_ref: None,
            taus: Vec::new(),
            n_ref: None,
            n_modes_list: Vec::new(),
            check_every: 1,
            coupling: Coupling::CellAverage,
            snapshot_every: 0,
            initials: Vec::new(),
            tests: Vec::new(),
            estimator: EstimatorChoice::Both,
            t_ensemble: None,
            ensemble_size: 0,
            burn_in: 0,
            record_every: 0,
            lf_radius: 10.0,
        }
    }

    /// Canonical text: every key that is set, one per line, in a fixed order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("command", self.command.as_str().into());
        put("seed", self.seed.to_string());
        if let Some(t) = self.tau {
            put("tau", fmt_f64(t));
        }
        if let Some(n) = self.n_modes {
            put("n_modes", n.to_string());
        }
        put("sigma", fmt_f64(self.sigma));
        put("a0", fmt_f64(self.drift.a0));
        put("a1", fmt_f64(self.drift.a1));
        put("a2", fmt_f64(self.drift.a2));
        put("a3", fmt_f64(self.drift.a3));
        put("validation", self.validation.to_string());
        put("initial", fmt_profile(&self.initial));
        if let Some(t) = self.t_final {
            put("t_final", fmt_f64(t));
        }
        put("trajectories", self.trajectories.to_string());
        if let Some(t) = self.tau_ref {
            put("tau_ref", fmt_f64(t));
        }
        if !self.taus.is_empty() {
            put("taus", self.taus.iter().map(|t| fmt_f64(*t)).collect::<Vec<_>>().join(", "));
        }
        if let Some(n) = self.n_ref {
            put("n_ref", n.to_string());
        }
        if !self.n_modes_list.is_empty() {
            put(
                "n_modes_list",
                self.n_modes_list.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(", "),
            );
        }
        put("check_every", self.check_every.to_string());
        put("coupling", self.coupling.as_str().into());
        put("snapshot_every", self.snapshot_every.to_string());
        if !self.initials.is_empty() {
            put("initials", self.initials.iter().map(fmt_profile).collect::<Vec<_>>().join("; "));
        }
        if !self.tests.is_empty() {
            put("tests", self.tests.iter().map(fmt_test).collect::<Vec<_>>().join("; "));
        }
        put("estimator", self.estimator.as_str().into());
        if let Some(t) = self.t_ensemble {
            put("t_ensemble", fmt_f64(t));
        }
        put("ensemble_size", self.ensemble_size.to_string());
        put("burn_in", self.burn_in.to_string());
        put("record_every", self.record_every.to_string());
        put("lf_radius", fmt_f64(self.lf_radius));
        s
    }

    /// Git-style content hash: SHA-256 of `"config <len>\0" + canonical text`.
    pub fn content_hash(&self) -> String {
        let text = self.to_text();
        let mut h = Sha256::new();
        h.update(format!("config {}\0", text.len()).as_bytes());
        h.update(text.as_bytes());
        hex::encode(h.finalize())
    }

    pub fn require_tau(&self) -> Result<f64> {
        self.tau.ok_or_else(|| missing("tau"))
    }

    pub fn require_n_modes(&self) -> Result<usize> {
        self.n_modes.ok_or_else(|| missing("n_modes"))
    }

    pub fn require_t_final(&self) -> Result<f64> {
        self.t_final.ok_or_else(|| missing("t_final"))
    }
}

fn missing(key: &str) -> Error {
    Error::Config(vec![format!("missing required key `{key}`")])
}

pub fn fmt_f64(v: f64) -> String {
    // `{:?}` is the shortest representation that parses back to the same value.
    format!("{v:?}")
}

fn fmt_profile(p: &InitialProfile) -> String {
    p.terms
        .iter()
        .map(|(a, k)| format!("{}@{}", fmt_f64(*a), k))
        .collect::<Vec<_>>()
        .join(", ")
}

fn fmt_test(t: &TestFunctionSpec) -> String {
    let v = match t.v {
        Profile::Exp => "exp".to_string(),
        Profile::ExpNeg => "expneg".to_string(),
        Profile::Const(c) => format!("const({})", fmt_f64(c)),
        Profile::Cos(k) => format!("cos({k})"),
    };
    format!("{v}:{}:{}", fmt_f64(t.alpha1), fmt_f64(t.alpha2))
}

/// Accepts decimals and simple fractions such as `1/3` or `-2/3`.
fn parse_number(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    let v = if let Some((p, q)) = s.split_once('/') {
        let p: f64 = p.trim().parse().map_err(|_| format!("not a number: `{s}`"))?;
        let q: f64 = q.trim().parse().map_err(|_| format!("not a number: `{s}`"))?;
        p / q
    } else {
        s.parse().map_err(|_| format!("not a number: `{s}`"))?
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("not a finite number: `{s}`"))
    }
}

/// `a@k, b@j, ...` meaning `a cos(kx) + b cos(jx) + ...`; a bare number is a
/// constant.
pub fn parse_profile(s: &str) -> std::result::Result<InitialProfile, String> {
    let mut terms = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (a, k) = match part.split_once('@') {
            Some((a, k)) => (a, k.trim().parse::<u32>().map_err(|_| format!("bad wavenumber in `{part}`"))?),
            None => (part, 0),
        };
        terms.push((parse_number(a)?, k));
    }
    if terms.is_empty() {
        return Err(format!("empty initial profile `{s}`"));
    }
    Ok(InitialProfile { terms })
}

/// `v:alpha1:alpha2` with `v` one of `exp`, `expneg`, `cos(k)`, `const(c)`.
pub fn parse_test(s: &str) -> std::result::Result<TestFunctionSpec, String> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("test function must be `v:alpha1:alpha2`, got `{s}`"));
    }
    let v = match parts[0] {
        "exp" => Profile::Exp,
        "expneg" => Profile::ExpNeg,
        other => {
            if let Some(k) = other.strip_prefix("cos(").and_then(|r| r.strip_suffix(')')) {
                Profile::Cos(k.trim().parse().map_err(|_| format!("bad cos wavenumber `{other}`"))?)
            } else if let Some(c) = other.strip_prefix("const(").and_then(|r| r.strip_suffix(')')) {
                Profile::Const(parse_number(c)?)
            } else {
                return Err(format!("unknown test-function profile `{other}`"));
            }
        }
    };
    let a1 = parse_number(parts[1])?;
    let a2 = parse_number(parts[2])?;
    if a2 == 0.0 {
        return Err(format!("alpha2 must be nonzero in `{s}`"));
    }
    TestFunctionSpec::new(v, a1, a2).map_err(|e| e.to_string())
}

/// Splits `key = value` lines, collecting syntax errors and duplicates.
fn raw_pairs(text: &str, errors: &mut Vec<String>) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            errors.push(format!("line {}: expected `key = value`, got `{line}`", lineno + 1));
            continue;
        };
        let k = k.trim().to_string();
        let v = v.trim().to_string();
        if !KEYS.contains(&k.as_str()) {
            errors.push(format!("line {}: unknown key `{k}`", lineno + 1));
            continue;
        }
        if map.insert(k.clone(), v).is_some() {
            errors.push(format!("line {}: duplicate key `{k}`", lineno + 1));
        }
    }
    map
}

/// Reads `SCHE_<KEY>` overrides for every known key from `lookup`.
pub fn env_overrides(lookup: impl Fn(&str) -> Option<String>) -> Vec<(String, String)> {
    KEYS.iter()
        .filter_map(|k| {
            let var = format!("{ENV_PREFIX}{}", k.to_ascii_uppercase());
            lookup(&var).map(|v| (k.to_string(), v))
        })
        .collect()
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with(text, &[], None)
}

/// Parses `text`, then applies `overrides` (later wins), then forces
/// `command` when given.
pub fn parse_config_with(text: &str, overrides: &[(String, String)], command: Option<Command>) -> Result<RunConfig> {
    let mut errors = Vec::new();
    let mut map = raw_pairs(text, &mut errors);
    for (k, v) in overrides {
        if KEYS.contains(&k.as_str()) {
            map.insert(k.clone(), v.clone());
        } else {
            errors.push(format!("unknown override key `{k}`"));
        }
    }
    if let Some(c) = command {
        if let Some(given) = map.get("command") {
            if given != c.as_str() {
                errors.push(format!("config is for `{given}`, but `{}` was requested", c.as_str()));
            }
        }
        map.insert("command".into(), c.as_str().into());
    }

    let command = match map.get("command") {
        Some(c) => match Command::parse(c) {
            Some(c) => c,
            None => {
                errors.push(format!("unknown command `{c}`"));
                Command::Verify
            }
        },
        None => {
            errors.push("missing required key `command`".into());
            Command::Verify
        }
    };
    let mut cfg = RunConfig::defaults(command);
    let mut p = Parser {
        map: &map,
        errors: &mut errors,
    };

    if let Some(v) = p.u64("seed") {
        cfg.seed = v;
    }
    cfg.tau = p.f64("tau");
    cfg.n_modes = p.usize("n_modes");
    if let Some(v) = p.f64("sigma") {
        cfg.sigma = v;
    }
    if let Some(v) = p.f64("a0") {
        cfg.drift.a0 = v;
    }
    if let Some(v) = p.f64("a1") {
        cfg.drift.a1 = v;
    }
    if let Some(v) = p.f64("a2") {
        cfg.drift.a2 = v;
    }
    if let Some(v) = p.f64("a3") {
        cfg.drift.a3 = v;
    }
    if let Some(v) = p.bool("validation") {
        cfg.validation = v;
    }
    if let Some(v) = p.with("initial", parse_profile) {
        cfg.initial = v;
    }
    cfg.t_final = p.f64("t_final");
    if let Some(v) = p.u64("trajectories") {
        cfg.trajectories = v;
    }
    cfg.tau_ref = p.f64("tau_ref");
    if let Some(v) = p.with("taus", |s| s.split(',').map(parse_number).collect()) {
        cfg.taus = v;
    }
    cfg.n_ref = p.usize("n_ref");
    if let Some(v) = p.with("n_modes_list", |s| {
        s.split(',')
            .map(|x| x.trim().parse::<usize>().map_err(|_| format!("not an integer: `{x}`")))
            .collect()
    }) {
        cfg.n_modes_list = v;
    }
    if let Some(v) = p.u64("check_every") {
        cfg.check_every = v;
    }
    if let Some(v) = p.with("coupling", |s| {
        Coupling::parse(s).ok_or_else(|| format!("coupling must be truncation or cell-average, got `{s}`"))
    }) {
        cfg.coupling = v;
    }
    if let Some(v) = p.u64("snapshot_every") {
        cfg.snapshot_every = v;
    }
    if let Some(v) = p.with("initials", |s| s.split(';').map(parse_profile).collect()) {
        cfg.initials = v;
    }
    if let Some(v) = p.with("tests", |s| s.split(';').map(parse_test).collect()) {
        cfg.tests = v;
    }
    if let Some(v) = p.with("estimator", |s| match s {
        "I" => Ok(EstimatorChoice::Ensemble),
        "II" => Ok(EstimatorChoice::Single),
        "both" => Ok(EstimatorChoice::Both),
        _ => Err(format!("estimator must be I, II or both, got `{s}`")),
    }) {
        cfg.estimator = v;
    }
    cfg.t_ensemble = p.f64("t_ensemble");
    if let Some(v) = p.u64("ensemble_size") {
        cfg.ensemble_size = v;
    }
    if let Some(v) = p.u64("burn_in") {
        cfg.burn_in = v;
    }
    if let Some(v) = p.u64("record_every") {
        cfg.record_every = v;
    }
    if let Some(v) = p.f64("lf_radius") {
        cfg.lf_radius = v;
    }

    validate(&cfg, &mut errors);
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(errors))
    }
}

struct Parser<'a> {
    map: &'a BTreeMap<String, String>,
    errors: &'a mut Vec<String>,
}

impl Parser<'_> {
    fn with<T>(&mut self, key: &str, f: impl Fn(&str) -> std::result::Result<T, String>) -> Option<T> {
        let raw = self.map.get(key)?;
        match f(raw.trim()) {
            Ok(v) => Some(v),
            Err(e) => {
                self.errors.push(format!("{key}: {e}"));
                None
            }
        }
    }

    fn f64(&mut self, key: &str) -> Option<f64> {
        self.with(key, parse_number)
    }

    fn u64(&mut self, key: &str) -> Option<u64> {
        self.with(key, |s| s.parse::<u64>().map_err(|_| format!("not a nonnegative integer: `{s}`")))
    }

    fn usize(&mut self, key: &str) -> Option<usize> {
        self.with(key, |s| s.parse::<usize>().map_err(|_| format!("not a nonnegative integer: `{s}`")))
    }

    fn bool(&mut self, key: &str) -> Option<bool> {
        self.with(key, |s| match s {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            _ => Err(format!("not a boolean: `{s}`")),
        })
    }
}

fn is_multiple(t: f64, tau: f64) -> bool {
    let m = (t / tau).round();
    m >= 1.0 && (m * tau - t).abs() <= 1e-9 * t.max(tau)
}

fn validate(cfg: &RunConfig, errors: &mut Vec<String>) {
    let mut err = |m: String| errors.push(m);
    let tau_ok = |name: &str, t: f64| -> Option<String> {
        (!(t > 0.0 && t < 1.0)).then(|| format!("{name} must lie in (0,1), got {t}"))
    };

    if let Some(t) = cfg.tau {
        if let Some(e) = tau_ok("tau", t) {
            err(e);
        }
    }
    if let Some(n) = cfg.n_modes {
        if n < 2 {
            err(format!("n_modes must be >= 2 (noise needs mode j=1), got {n}"));
        }
    }
    if cfg.sigma < 0.0 {
        err(format!("sigma must be >= 0, got {}", cfg.sigma));
    }
    if let Err(e) = cfg.drift.validate(cfg.validation) {
        err(e.to_string());
    }
    if let Some(t) = cfg.t_final {
        if t <= 0.0 {
            err(format!("t_final must be positive, got {t}"));
        }
    }
    if cfg.lf_radius <= 0.0 {
        err(format!("lf_radius must be positive, got {}", cfg.lf_radius));
    }
    if cfg.check_every == 0 {
        err("check_every must be >= 1".into());
    }

    let need = |k: &str, present: bool, errs: &mut Vec<String>| {
        if !present {
            errs.push(format!("missing required key `{k}` for `{}`", cfg.command.as_str()));
        }
    };
    let mut miss = Vec::new();
    match cfg.command {
        Command::Simulate => {
            need("tau", cfg.tau.is_some(), &mut miss);
            need("n_modes", cfg.n_modes.is_some(), &mut miss);
            need("t_final", cfg.t_final.is_some(), &mut miss);
            if let (Some(t), Some(tau)) = (cfg.t_final, cfg.tau) {
                if !is_multiple(t, tau) {
                    miss.push(format!("t_final = {t} is not a multiple of tau = {tau}"));
                }
            }
        }
        Command::ConvergeTime => {
            need("n_modes", cfg.n_modes.is_some(), &mut miss);
            need("t_final", cfg.t_final.is_some(), &mut miss);
            need("tau_ref", cfg.tau_ref.is_some(), &mut miss);
            need("taus", !cfg.taus.is_empty(), &mut miss);
            if cfg.trajectories == 0 {
                miss.push("trajectories must be >= 1".into());
            }
            if let Some(r) = cfg.tau_ref {
                if let Some(e) = tau_ok("tau_ref", r) {
                    miss.push(e);
                }
                for &t in &cfg.taus {
                    if let Some(e) = tau_ok("taus entry", t) {
                        miss.push(e);
                    } else if !is_multiple(t, r) {
                        miss.push(format!("taus entry {t} is not a multiple of tau_ref = {r}"));
                    }
                }
            }
            if let (Some(n), Some(r)) = (cfg.n_modes, cfg.n_ref) {
                if n > r {
                    miss.push(format!("n_modes = {n} exceeds n_ref = {r}"));
                } else if cfg.coupling == Coupling::CellAverage && n >= 2 && r % n != 0 {
                    miss.push(format!("cell-average coupling needs n_modes = {n} to divide n_ref = {r}"));
                }
            }
        }
        Command::ConvergeSpace => {
            need("tau", cfg.tau.is_some(), &mut miss);
            need("t_final", cfg.t_final.is_some(), &mut miss);
            need("n_ref", cfg.n_ref.is_some(), &mut miss);
            need("n_modes_list", !cfg.n_modes_list.is_empty(), &mut miss);
            if cfg.trajectories == 0 {
                miss.push("trajectories must be >= 1".into());
            }
            for &n in &cfg.n_modes_list {
                if n < 2 {
                    miss.push(format!("n_modes_list entry {n} must be >= 2"));
                }
                if let Some(r) = cfg.n_ref {
                    if n > r {
                        miss.push(format!("n_modes_list entry {n} exceeds n_ref = {r}"));
                    } else if cfg.coupling == Coupling::CellAverage && n >= 2 && r % n != 0 {
                        miss.push(format!("cell-average coupling needs {n} to divide n_ref = {r}"));
                    }
                }
            }
        }
        Command::Ergodic => {
            need("tau", cfg.tau.is_some(), &mut miss);
            need("n_modes", cfg.n_modes.is_some(), &mut miss);
            need("initials", !cfg.initials.is_empty(), &mut miss);
            need("tests", !cfg.tests.is_empty(), &mut miss);
            let single = matches!(cfg.estimator, EstimatorChoice::Single | EstimatorChoice::Both);
            let ensemble = matches!(cfg.estimator, EstimatorChoice::Ensemble | EstimatorChoice::Both);
            if single {
                need("t_final", cfg.t_final.is_some(), &mut miss);
            }
            if ensemble {
                need("t_ensemble", cfg.t_ensemble.is_some(), &mut miss);
                if cfg.ensemble_size == 0 {
                    miss.push("ensemble_size must be >= 1 for estimator I".into());
                }
            }
        }
        Command::Verify => {}
    }
    errors.extend(miss);
}

/// Extracts the configuration echoed in an output file's leading metadata
/// block, or `None` if `text` does not start with the marker line.
pub fn config_from_header(text: &str) -> Option<String> {
    let mut lines = text.lines();
    if !lines.next()?.starts_with(HEADER_MARKER) {
        return None;
    }
    let mut out = String::new();
    for line in lines {
        let Some(rest) = line.strip_prefix('#') else { break };
        let rest = rest.trim_start();
        if rest.starts_with('@') || rest.is_empty() {
            continue;
        }
        out.push_str(rest);
        out.push('\n');
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIM: &str = "command = simulate\ntau = 0.01\nn_modes = 64\nsigma = 1.0\nt_final = 1\n";

    fn errors_of(text: &str) -> Vec<String> {
        match parse_config(text) {
            Err(Error::Config(e)) => e,
            other => panic!("expected config errors, got {other:?}"),
        }
    }

    #[test]
    fn parses_simple_config() {
        let c = parse_config(SIM).unwrap();
        assert_eq!(c.command, Command::Simulate);
        assert_eq!(c.tau, Some(0.01));
        assert_eq!(c.n_modes, Some(64));
        assert_eq!(c.drift, DriftSpec::benchmark());
    }

    #[test]
    fn tau_out_of_range() {
        let e = errors_of(&SIM.replace("tau = 0.01", "tau = 1.5"));
        assert!(e.iter().any(|m| m.contains("tau must lie in (0,1)")), "{e:?}");
    }

    #[test]
    fn single_mode_rejected() {
        let e = errors_of(&SIM.replace("n_modes = 64", "n_modes = 1"));
        assert!(e.iter().any(|m| m.contains("n_modes")));
    }

    #[test]
    fn all_errors_reported() {
        let e = errors_of("command = simulate\ntau = 2\nbogus = 1\nn_modes = x\n");
        assert!(e.iter().any(|m| m.contains("unknown key `bogus`")));
        assert!(e.iter().any(|m| m.contains("tau must lie")));
        assert!(e.iter().any(|m| m.contains("n_modes")));
        assert!(e.iter().any(|m| m.contains("t_final")));
    }

    #[test]
    fn duplicates_and_missing_command() {
        let e = errors_of("tau = 0.1\ntau = 0.2\n");
        assert!(e.iter().any(|m| m.contains("duplicate")));
        assert!(e.iter().any(|m| m.contains("command")));
    }

    #[test]
    fn fractions_profiles_and_tests() {
        let c = parse_config(
            "command = ergodic\ntau = 0.005\nn_modes = 64\nt_final = 500\nestimator = II\n\
             initials = 1/3; 1/3@1, 1/3@0; 2@2, 1@1, 1/3\ntests = exp:1:2; expneg:1:3; cos(2):0:1\n",
        )
        .unwrap();
        assert_eq!(c.initials.len(), 3);
        assert_eq!(c.initials[0], InitialProfile::constant(1.0 / 3.0));
        assert_eq!(c.initials[2].terms, vec![(2.0, 2), (1.0, 1), (1.0 / 3.0, 0)]);
        assert_eq!(c.tests[1].v, Profile::ExpNeg);
        assert_eq!(c.tests[2].v, Profile::Cos(2));
        assert!(parse_test("exp:1:0").is_err());
        assert!(parse_test("sin:1:1").is_err());
    }

    #[test]
    fn validation_mode_gates_zero_cubic() {
        assert!(parse_config(&format!("{SIM}a0 = 0\n")).is_err());
        assert!(parse_config(&format!("{SIM}a0 = 0\nvalidation = true\n")).is_ok());
    }

    #[test]
    fn overrides_and_forced_command() {
        let o = vec![("tau".to_string(), "0.02".to_string())];
        let c = parse_config_with(SIM, &o, Some(Command::Simulate)).unwrap();
        assert_eq!(c.tau, Some(0.02));
        assert!(parse_config_with(SIM, &[], Some(Command::Ergodic)).is_err());
        let env = env_overrides(|k| (k == "SCHE_SEED").then(|| "9".to_string()));
        assert_eq!(env, vec![("seed".to_string(), "9".to_string())]);
    }

    #[test]
    fn canonical_text_round_trips() {
        let c = parse_config(
            "command = converge-time\nn_modes = 64\nt_final = 1\ntau_ref = 1/4096\n\
             taus = 1/16, 1/32, 1/64\ntrajectories = 10\nseed = 17\ninitial = 1/3@0, 1/3@1\n",
        )
        .unwrap();
        let again = parse_config(&c.to_text()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.content_hash(), again.content_hash());
        assert_eq!(c.content_hash().len(), 64);
    }

    #[test]
    fn header_extraction() {
        let text = "# @sche 0.1.0\n# @kind convergence\n# command = verify\n# seed = 3\nparam_kind,tau\n# slope = 1\n";
        let cfg = config_from_header(text).unwrap();
        assert_eq!(cfg, "command = verify\nseed = 3\n");
        assert_eq!(parse_config(&cfg).unwrap().seed, 3);
        assert!(config_from_header("tau = 1\n").is_none());
    }
}
