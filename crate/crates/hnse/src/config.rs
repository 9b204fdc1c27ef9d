//! Flat `key = value` run configuration.
//!
//! Resolution order, lowest to highest priority: built-in defaults, the
//! config file, flag overrides, and `HNSE_OUTPUT_DIR` for the output directory.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use hnse_core::dynamics::{Integrator, Nonlinearity, SimConfig};
use hnse_core::lattice::AnnulusFamily;
use hnse_core::spectral::{Dealias, ParamError, SpectralParams};
use hnse_core::truncation::CutoffProfile;
use serde::Serialize;

pub const OUTPUT_DIR_ENV: &str = "HNSE_OUTPUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("key {key:?}: cannot parse {value:?}: {reason}")]
    Value { key: String, value: String, reason: String },
    #[error("invalid configuration: {0}")]
    Invariant(String),
}

impl From<ParamError> for ConfigError {
    fn from(e: ParamError) -> Self {
        ConfigError::Invariant(e.to_string())
    }
}

/// Pipeline stages in dependency order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Gaps,
    Sparse,
    Strips,
    Cutoff,
    Simulate,
    Cone,
    Averaging,
}

impl Stage {
    pub const ALL: [Stage; 7] =
        [Stage::Gaps, Stage::Sparse, Stage::Strips, Stage::Cutoff, Stage::Simulate, Stage::Cone, Stage::Averaging];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Gaps => "gaps",
            Stage::Sparse => "sparse",
            Stage::Strips => "strips",
            Stage::Cutoff => "cutoff",
            Stage::Simulate => "simulate",
            Stage::Cone => "cone",
            Stage::Averaging => "averaging",
        }
    }

    /// Direct prerequisites.
    pub fn requires(self) -> &'static [Stage] {
        match self {
            Stage::Cutoff => &[Stage::Sparse],
            Stage::Cone => &[Stage::Cutoff],
            Stage::Averaging => &[Stage::Sparse],
            _ => &[],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL.into_iter().find(|st| st.name() == s).ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

/// Requested stages plus their prerequisites, sorted into execution order.
pub fn close_stages(requested: &[Stage]) -> Vec<Stage> {
    let mut out: Vec<Stage> = Vec::new();
    let mut todo: Vec<Stage> = requested.to_vec();
    while let Some(s) = todo.pop() {
        if !out.contains(&s) {
            out.push(s);
            todo.extend_from_slice(s.requires());
        }
    }
    out.sort();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Forcing {
    Zero,
    /// `f = ν (sin x₂, 0)`, whose steady state is the shear `(sin x₂, 0)`.
    Shear,
}

/// Fully resolved configuration, echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub params: SpectralParams,
    pub sim: SimConfig,
    pub mu: f64,
    pub seed: u64,
    pub theta_outer_radius: f64,
    pub stages: Vec<Stage>,
    pub gaps_limit: u64,
    pub forcing: Forcing,
    pub samples: usize,
    pub low_radius: i64,
    pub cone_steps: usize,
    pub cone_delta: f64,
    /// Cone time step; `None` means `0.1 / λ_{N+1}^β`.
    pub cone_dt: Option<f64>,
    pub absorbing_samples: usize,
    pub transient: f64,
    /// Not part of the echo: where outputs land does not affect them.
    #[serde(skip)]
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn profile(&self) -> CutoffProfile {
        CutoffProfile::with_outer_radius(self.theta_outer_radius).expect("validated at resolution")
    }

    pub fn checks_requested(&self) -> bool {
        self.stages.iter().any(|s| matches!(s, Stage::Cone | Stage::Averaging))
    }

    /// The resolved config in the file format, so that it can be fed back in.
    pub fn to_key_values(&self) -> String {
        let p = &self.params;
        let stages: Vec<&str> = self.stages.iter().map(|s| s.name()).collect();
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        put("beta", fmt_f64(p.beta));
        put("s", fmt_f64(p.s));
        put("nu", fmt_f64(p.nu));
        put("rho", fmt_f64(p.rho));
        put("M", p.m.to_string());
        put("mu", fmt_f64(self.mu));
        put("seed", self.seed.to_string());
        put("dt", fmt_f64(self.sim.dt));
        put("T", fmt_f64(self.sim.t_final));
        put("integrator", integrator_name(self.sim.integrator).into());
        put("dealias", self.sim.dealias.name().into());
        put("nonlinearity", nonlinearity_name(self.sim.nonlinearity).into());
        put("theta_outer_radius", fmt_f64(self.theta_outer_radius));
        put("stages", stages.join(","));
        put("gaps_limit", self.gaps_limit.to_string());
        put("forcing", if self.forcing == Forcing::Shear { "shear" } else { "zero" }.into());
        put("samples", self.samples.to_string());
        put("low_radius", self.low_radius.to_string());
        put("cone_steps", self.cone_steps.to_string());
        put("cone_delta", fmt_f64(self.cone_delta));
        put("cone_dt", self.cone_dt.map_or("auto".into(), fmt_f64));
        put("absorbing_samples", self.absorbing_samples.to_string());
        put("transient", fmt_f64(self.transient));
        out
    }
}

/// Shortest decimal that round-trips.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn integrator_name(i: Integrator) -> &'static str {
    match i {
        Integrator::ExponentialIntegratingFactor => "etd2",
        Integrator::ImplicitExplicit => "imex",
    }
}

fn nonlinearity_name(n: Nonlinearity) -> &'static str {
    match n {
        Nonlinearity::Prepared => "prepared",
        Nonlinearity::Original => "original",
        Nonlinearity::Disabled => "disabled",
    }
}

pub const KEYS: &[&str] = &[
    "beta",
    "s",
    "nu",
    "rho",
    "M",
    "mu",
    "seed",
    "dt",
    "T",
    "integrator",
    "dealias",
    "nonlinearity",
    "theta_outer_radius",
    "output_dir",
    "stages",
    "gaps_limit",
    "forcing",
    "samples",
    "low_radius",
    "cone_steps",
    "cone_delta",
    "cone_dt",
    "absorbing_samples",
    "transient",
];

/// Parses the flat format: one `key = value` per line, `#` starts a comment,
/// blank lines are ignored. Later duplicates win.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::Syntax { line: i + 1, text: raw.to_string() });
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(ConfigError::Syntax { line: i + 1, text: raw.to_string() });
        }
        if !KEYS.contains(&k) {
            return Err(ConfigError::UnknownKey(k.to_string()));
        }
        out.insert(k.to_string(), v.to_string());
    }
    Ok(out)
}

/// Splits a `key=value` flag.
pub fn parse_override(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected KEY=VALUE, got {s:?}"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

struct Values(BTreeMap<String, String>);

impl Values {
    fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e: T::Err| ConfigError::Value {
                key: key.into(),
                value: v.clone(),
                reason: e.to_string(),
            }),
        }
    }

    fn get_with<T>(&self, key: &str, default: T, parse: impl Fn(&str) -> Option<T>) -> Result<T, ConfigError> {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => parse(v).ok_or_else(|| ConfigError::Value {
                key: key.into(),
                value: v.clone(),
                reason: "unrecognized value".into(),
            }),
        }
    }
}

/// Reads the config file (if any), applies the overrides in order and
/// validates the result. `HNSE_OUTPUT_DIR`, when set, replaces the output
/// directory.
pub fn resolve_config(path: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig, ConfigError> {
    let mut map = match path {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).map_err(|source| ConfigError::Io { path: p.to_path_buf(), source })?;
            parse_key_values(&text)?
        }
        None => BTreeMap::new(),
    };
    for (k, v) in overrides {
        if !KEYS.contains(&k.as_str()) {
            return Err(ConfigError::UnknownKey(k.clone()));
        }
        map.insert(k.clone(), v.clone());
    }
    if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
        if !dir.is_empty() {
            map.insert("output_dir".into(), dir);
        }
    }
    build(Values(map))
}

fn build(v: Values) -> Result<RunConfig, ConfigError> {
    let beta = v.get("beta", 1.45)?;
    let s = v.get("s", SpectralParams::default_s(beta))?;
    let params = SpectralParams::new(beta, v.get("nu", 1.0)?, v.get("M", 16)?, s, v.get("rho", 1.0)?)?;
    let seed = v.get("seed", 0u64)?;
    let sim = SimConfig {
        dt: v.get("dt", 1e-2)?,
        t_final: v.get("T", 10.0)?,
        integrator: v.get_with("integrator", Integrator::default(), |s| match s {
            "etd2" | "exponential" | "exponential_integrating_factor" => Some(Integrator::ExponentialIntegratingFactor),
            "imex" | "implicit_explicit" => Some(Integrator::ImplicitExplicit),
            _ => None,
        })?,
        dealias: v.get_with("dealias", Dealias::TwoThirds, |s| s.parse().ok())?,
        seed,
        nonlinearity: v.get_with("nonlinearity", Nonlinearity::default(), |s| match s {
            "prepared" => Some(Nonlinearity::Prepared),
            "original" => Some(Nonlinearity::Original),
            "disabled" | "none" => Some(Nonlinearity::Disabled),
            _ => None,
        })?,
    };
    sim.validate().map_err(|e| ConfigError::Invariant(e.to_string()))?;
    let stages: Vec<Stage> = v.get_with("stages", Stage::ALL.to_vec(), |s| {
        s.split(',').map(|x| x.trim()).filter(|x| !x.is_empty()).map(|x| x.parse().ok()).collect()
    })?;
    let cfg = RunConfig {
        params,
        sim,
        mu: v.get("mu", 1e4)?,
        seed,
        theta_outer_radius: v.get("theta_outer_radius", CutoffProfile::default().outer_radius)?,
        stages: close_stages(&stages),
        gaps_limit: v.get("gaps_limit", 1_000_000u64)?,
        forcing: v.get_with("forcing", Forcing::Shear, |s| match s {
            "shear" => Some(Forcing::Shear),
            "zero" | "none" => Some(Forcing::Zero),
            _ => None,
        })?,
        samples: v.get("samples", 20usize)?,
        low_radius: v.get("low_radius", 4i64)?,
        cone_steps: v.get("cone_steps", 10usize)?,
        cone_delta: v.get("cone_delta", 0.1)?,
        cone_dt: v.get_with("cone_dt", None, |s| if s == "auto" { Some(None) } else { s.parse().ok().map(Some) })?,
        absorbing_samples: v.get("absorbing_samples", 1usize)?,
        transient: v.get("transient", 0.5)?,
        output_dir: PathBuf::from(v.0.get("output_dir").map_or("runs", |s| s.as_str())),
    };
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(c: &RunConfig) -> Result<(), ConfigError> {
    let bad = |m: String| Err(ConfigError::Invariant(m));
    CutoffProfile::with_outer_radius(c.theta_outer_radius).map_err(|e| ConfigError::Invariant(e.to_string()))?;
    if c.checks_requested() {
        c.params.validate_for_checks()?;
    }
    let lattice = [Stage::Sparse, Stage::Strips].iter().any(|s| c.stages.contains(s));
    if lattice {
        AnnulusFamily::new(c.mu, c.params.s).map_err(|e| ConfigError::Invariant(e.to_string()))?;
    }
    if c.low_radius < 1 {
        return bad(format!("low_radius = {} must be at least 1", c.low_radius));
    }
    if !(0.0..1.0).contains(&c.transient) {
        return bad(format!("transient = {} must lie in [0, 1)", c.transient));
    }
    if !(c.cone_delta > 0.0 && c.cone_delta.is_finite()) {
        return bad(format!("cone_delta = {} must be positive", c.cone_delta));
    }
    if let Some(dt) = c.cone_dt {
        if !(dt > 0.0 && dt.is_finite()) {
            return bad(format!("cone_dt = {dt} must be positive"));
        }
    }
    if c.cone_steps == 0 {
        return bad("cone_steps must be at least 1".into());
    }
    if c.gaps_limit < 2 {
        return bad(format!("gaps_limit = {} must be at least 2", c.gaps_limit));
    }
    Ok(())
}
