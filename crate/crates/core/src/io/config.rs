//! INI-like run configuration.
//!
//! ```text
//! [flow]
//! kind = nsf
//! mu = 1.0
//! mach = 100
//!
//! [profile]
//! preset = linear-compression
//! temperature = sine(1.0)
//!
//! [grid]
//! n_cells = 256
//!
//! [time]
//! t_end = 10
//! ```
//!
//! Keys are addressed as `section.key`. At the top level `flow` and `profile`
//! are shorthands for `flow.kind` and `profile.preset`. A preset is applied
//! before the individual profile keys, whatever the order in the file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::model::{DensityProfile, FlowKind, Params, Profile, TemperatureProfile, VelocityProfile};
use crate::stepper::{StepControl, StepOptions, StretchCoupling, TimeScheme};

/// Environment variable that overrides `output.dir`.
pub const OUTPUT_ENV: &str = "STICKYFLOW_OUT";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub flow_kind: FlowKind,
    pub mu: f64,
    pub kappa: f64,
    /// Required for NSF runs.
    pub mach: Option<f64>,
    pub alpha: f64,
    pub profile: Profile,
    /// Shift the initial velocity to zero momentum.
    pub normalize: bool,
    pub n_cells: usize,
    pub control: StepControl,
    pub scheme: TimeScheme,
    pub coupling: StretchCoupling,
    /// Keep a diagnostics record every this many steps (and at the end).
    pub record_every: usize,
    /// Keep a full state every this many steps; 0 keeps none.
    pub snapshot_every: usize,
    pub output_dir: PathBuf,
    /// Slack factor for bounds whose constants are not quantified.
    pub bound_factor: f64,
    /// Weight rate of the NSF energy functional; half the fitted decay rate if unset.
    pub frak_c1: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            flow_kind: FlowKind::Pressureless,
            mu: 1.0,
            kappa: 1.0,
            mach: None,
            alpha: 1.0,
            profile: Profile::stationary(),
            normalize: true,
            n_cells: 256,
            control: StepControl { dt_init: 1e-3, dt_min: 1e-10, dt_max: 0.05, cfl_coeff: 0.5, t_end: 10.0 },
            scheme: TimeScheme::BackwardEuler,
            coupling: StretchCoupling::LogMean,
            record_every: 1,
            snapshot_every: 0,
            output_dir: PathBuf::from("out"),
            bound_factor: 10.0,
            frak_c1: None,
        }
    }
}

/// Named initial-data presets.
pub fn preset(name: &str) -> Option<Profile> {
    let flat = DensityProfile::Constant(1.0);
    let (density, velocity, temperature) = match name {
        "stationary" => return Some(Profile::stationary()),
        "linear-compression" => return Some(Profile::linear_compression()),
        "linear-expansion" => (flat, VelocityProfile::Polynomial(vec![0.0, 1.0]), TemperatureProfile::Zero),
        "sine-compression" => (flat, VelocityProfile::Sine { amplitude: -1.0, mode: 1.0 }, TemperatureProfile::Zero),
        "sine-expansion" => (flat, VelocityProfile::Sine { amplitude: 1.0, mode: 1.0 }, TemperatureProfile::Zero),
        "sine-mode3" => (flat, VelocityProfile::Sine { amplitude: 1.0, mode: 3.0 }, TemperatureProfile::Zero),
        "self-similar" => (
            DensityProfile::SelfSimilar { center: 1.0 },
            VelocityProfile::Polynomial(vec![0.0, 1.0]),
            TemperatureProfile::Zero,
        ),
        _ => return None,
    };
    Some(Profile { density, velocity, temperature })
}

pub const PRESETS: [&str; 7] = [
    "stationary",
    "linear-compression",
    "linear-expansion",
    "sine-compression",
    "sine-expansion",
    "sine-mode3",
    "self-similar",
];

/// Splits `name(a, b, ...)` into the name and its numeric arguments.
fn call(s: &str) -> std::result::Result<(&str, Vec<f64>), String> {
    let s = s.trim();
    let Some(open) = s.find('(') else {
        return Ok((s, Vec::new()));
    };
    let inner = s[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| format!("missing ')' in {s:?}"))?;
    let args = if inner.trim().is_empty() {
        Vec::new()
    } else {
        inner.split(',').map(|a| parse_f64(a.trim())).collect::<std::result::Result<_, _>>()?
    };
    Ok((s[..open].trim(), args))
}

fn arity(name: &str, args: &[f64], n: usize) -> std::result::Result<(), String> {
    if args.len() != n {
        return Err(format!("{name} takes {n} argument(s), got {}", args.len()));
    }
    Ok(())
}

fn nonempty(name: &str, args: &[f64]) -> std::result::Result<(), String> {
    if args.is_empty() {
        return Err(format!("{name} needs at least one argument"));
    }
    Ok(())
}

pub fn parse_density(s: &str) -> std::result::Result<DensityProfile, String> {
    let (name, a) = call(s)?;
    Ok(match name {
        "constant" => {
            arity(name, &a, 1)?;
            DensityProfile::Constant(a[0])
        }
        "polynomial" => {
            nonempty(name, &a)?;
            DensityProfile::Polynomial(a)
        }
        "gaussian" => {
            arity(name, &a, 3)?;
            DensityProfile::Gaussian { amplitude: a[0], width: a[1], base: a[2] }
        }
        "self-similar" => {
            arity(name, &a, 1)?;
            DensityProfile::SelfSimilar { center: a[0] }
        }
        "samples" => {
            nonempty(name, &a)?;
            DensityProfile::Samples(a)
        }
        _ => return Err(format!("unknown density profile {name:?}")),
    })
}

pub fn parse_velocity(s: &str) -> std::result::Result<VelocityProfile, String> {
    let (name, a) = call(s)?;
    Ok(match name {
        "constant" => {
            arity(name, &a, 1)?;
            VelocityProfile::Constant(a[0])
        }
        "polynomial" => {
            nonempty(name, &a)?;
            VelocityProfile::Polynomial(a)
        }
        "sine" => {
            arity(name, &a, 2)?;
            VelocityProfile::Sine { amplitude: a[0], mode: a[1] }
        }
        "samples" => {
            nonempty(name, &a)?;
            VelocityProfile::Samples(a)
        }
        _ => return Err(format!("unknown velocity profile {name:?}")),
    })
}

pub fn parse_temperature(s: &str) -> std::result::Result<TemperatureProfile, String> {
    let (name, a) = call(s)?;
    Ok(match name {
        "zero" => {
            arity(name, &a, 0)?;
            TemperatureProfile::Zero
        }
        "polynomial" => {
            nonempty(name, &a)?;
            TemperatureProfile::Polynomial(a)
        }
        "sine" => {
            arity(name, &a, 1)?;
            TemperatureProfile::Sine { amplitude: a[0] }
        }
        "samples" => {
            nonempty(name, &a)?;
            TemperatureProfile::Samples(a)
        }
        _ => return Err(format!("unknown temperature profile {name:?}")),
    })
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

pub fn format_density(d: &DensityProfile) -> String {
    match d {
        DensityProfile::Constant(c) => format!("constant({c:?})"),
        DensityProfile::Polynomial(c) => format!("polynomial({})", list(c)),
        DensityProfile::Gaussian { amplitude, width, base } => format!("gaussian({amplitude:?}, {width:?}, {base:?})"),
        DensityProfile::SelfSimilar { center } => format!("self-similar({center:?})"),
        DensityProfile::Samples(s) => format!("samples({})", list(s)),
    }
}

pub fn format_velocity(v: &VelocityProfile) -> String {
    match v {
        VelocityProfile::Constant(c) => format!("constant({c:?})"),
        VelocityProfile::Polynomial(c) => format!("polynomial({})", list(c)),
        VelocityProfile::Sine { amplitude, mode } => format!("sine({amplitude:?}, {mode:?})"),
        VelocityProfile::Samples(s) => format!("samples({})", list(s)),
    }
}

pub fn format_temperature(t: &TemperatureProfile) -> String {
    match t {
        TemperatureProfile::Zero => "zero".to_string(),
        TemperatureProfile::Polynomial(c) => format!("polynomial({})", list(c)),
        TemperatureProfile::Sine { amplitude } => format!("sine({amplitude:?})"),
        TemperatureProfile::Samples(s) => format!("samples({})", list(s)),
    }
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    s.parse::<f64>().map_err(|_| format!("expected a number, got {s:?}"))
}

fn parse_usize(s: &str) -> std::result::Result<usize, String> {
    s.parse::<usize>().map_err(|_| format!("expected a non-negative integer, got {s:?}"))
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got {s:?}")),
    }
}

/// Every accepted key path.
pub const KEYS: [&str; 23] = [
    "flow.kind",
    "flow.mu",
    "flow.kappa",
    "flow.mach",
    "flow.alpha",
    "profile.preset",
    "profile.density",
    "profile.velocity",
    "profile.temperature",
    "profile.normalize",
    "grid.n_cells",
    "time.t_end",
    "time.dt_init",
    "time.dt_min",
    "time.dt_max",
    "time.cfl_coeff",
    "time.scheme",
    "time.coupling",
    "output.dir",
    "output.record_every",
    "output.snapshot_every",
    "verify.bound_factor",
    "verify.frak_c1",
];

fn canonical_key(key: &str) -> &str {
    match key {
        "flow" => "flow.kind",
        "profile" => "profile.preset",
        other => other,
    }
}

fn config_error(line: Option<usize>, key: &str, message: impl Into<String>) -> Error {
    Error::Config { line, key: key.to_string(), message: message.into() }
}

impl RunConfig {
    pub fn params(&self) -> Params {
        match self.flow_kind {
            FlowKind::Pressureless => Params::pressureless(self.mu),
            FlowKind::Nsf => Params::nsf(self.mu, self.kappa, self.mach.unwrap_or(f64::NAN)),
            FlowKind::Degenerate => Params::degenerate(self.alpha),
        }
    }

    pub fn step_options(&self) -> StepOptions {
        StepOptions { scheme: self.scheme, coupling: self.coupling, ..StepOptions::default() }
    }

    /// Sets one key from its textual value, with the same rules as the parser.
    /// Sets one key. On error the config is left unchanged.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = canonical_key(key);
        let mut next = self.clone();
        next.apply(key, value.trim()).map_err(|m| config_error(None, key, m))?;
        next.check_key(key).map_err(|m| config_error(None, key, m))?;
        *self = next;
        Ok(())
    }

    fn apply(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        match key {
            "flow.kind" => {
                self.flow_kind = FlowKind::from_name(v).ok_or_else(|| {
                    format!("unknown flow kind {v:?} (expected pressureless, nsf or degenerate)")
                })?
            }
            "flow.mu" => self.mu = parse_f64(v)?,
            "flow.kappa" => self.kappa = parse_f64(v)?,
            "flow.mach" => self.mach = Some(parse_f64(v)?),
            "flow.alpha" => self.alpha = parse_f64(v)?,
            "profile.preset" => {
                self.profile = preset(v).ok_or_else(|| format!("unknown preset {v:?} (known: {})", PRESETS.join(", ")))?
            }
            "profile.density" => self.profile.density = parse_density(v)?,
            "profile.velocity" => self.profile.velocity = parse_velocity(v)?,
            "profile.temperature" => self.profile.temperature = parse_temperature(v)?,
            "profile.normalize" => self.normalize = parse_bool(v)?,
            "grid.n_cells" => self.n_cells = parse_usize(v)?,
            "time.t_end" => self.control.t_end = parse_f64(v)?,
            "time.dt_init" => self.control.dt_init = parse_f64(v)?,
            "time.dt_min" => self.control.dt_min = parse_f64(v)?,
            "time.dt_max" => self.control.dt_max = parse_f64(v)?,
            "time.cfl_coeff" => self.control.cfl_coeff = parse_f64(v)?,
            "time.scheme" => {
                self.scheme = TimeScheme::from_name(v)
                    .ok_or_else(|| format!("unknown scheme {v:?} (expected backward-euler or crank-nicolson)"))?
            }
            "time.coupling" => {
                self.coupling = StretchCoupling::from_name(v)
                    .ok_or_else(|| format!("unknown coupling {v:?} (expected log-mean or frozen)"))?
            }
            "output.dir" => {
                if v.is_empty() {
                    return Err("empty path".into());
                }
                self.output_dir = PathBuf::from(v)
            }
            "output.record_every" => self.record_every = parse_usize(v)?,
            "output.snapshot_every" => self.snapshot_every = parse_usize(v)?,
            "verify.bound_factor" => self.bound_factor = parse_f64(v)?,
            "verify.frak_c1" => self.frak_c1 = Some(parse_f64(v)?),
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    /// Range check of a single key.
    fn check_key(&self, key: &str) -> std::result::Result<(), String> {
        let positive = |x: f64| -> std::result::Result<(), String> {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(format!("must be a positive finite number, got {x}"))
            }
        };
        let c = &self.control;
        match key {
            "flow.mu" => positive(self.mu),
            "flow.kappa" => positive(self.kappa),
            "flow.mach" => match self.mach {
                Some(m) if m >= 1.0 && m.is_finite() => Ok(()),
                Some(m) => Err(format!("must be finite and >= 1, got {m}")),
                None if self.flow_kind == FlowKind::Nsf => Err("required for flow kind nsf".into()),
                None => Ok(()),
            },
            "flow.alpha" => positive(self.alpha),
            "grid.n_cells" if self.n_cells < 2 || self.n_cells > 10_000_000 => {
                Err(format!("must lie in [2, 10000000], got {}", self.n_cells))
            }
            "time.t_end" if !(c.t_end >= 0.0 && c.t_end.is_finite()) => {
                Err(format!("must be finite and >= 0, got {}", c.t_end))
            }
            "time.dt_init" => positive(c.dt_init),
            "time.dt_min" => positive(c.dt_min),
            "time.dt_max" => positive(c.dt_max),
            "time.cfl_coeff" if !(c.cfl_coeff > 0.0 && c.cfl_coeff <= 1.0) => {
                Err(format!("must lie in (0, 1], got {}", c.cfl_coeff))
            }
            "output.record_every" if self.record_every == 0 => Err("must be >= 1".into()),
            "verify.bound_factor" => positive(self.bound_factor),
            "verify.frak_c1" => match self.frak_c1 {
                Some(x) if !(x >= 0.0 && x.is_finite()) => Err(format!("must be finite and >= 0, got {x}")),
                _ => Ok(()),
            },
            _ => Ok(()),
        }
    }

    /// Range checks on every field, plus the cross-field step bounds.
    pub fn validate(&self) -> Result<()> {
        for key in KEYS {
            self.check_key(key).map_err(|m| config_error(None, key, m))?;
        }
        let c = &self.control;
        if !(c.dt_min <= c.dt_init && c.dt_init <= c.dt_max) {
            return Err(config_error(
                None,
                "time.dt_init",
                format!("need dt_min <= dt_init <= dt_max, got {} / {} / {}", c.dt_min, c.dt_init, c.dt_max),
            ));
        }
        Ok(())
    }

    /// Replaces the output directory with `$STICKYFLOW_OUT` when set.
    pub fn apply_env(&mut self) {
        if let Some(dir) = std::env::var_os(OUTPUT_ENV).filter(|d| !d.is_empty()) {
            self.output_dir = PathBuf::from(dir);
        }
    }

    /// The fully resolved configuration; parsing it gives back `self`.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let c = &self.control;
        let _ = writeln!(s, "[flow]");
        let _ = writeln!(s, "kind = {}", self.flow_kind.name());
        let _ = writeln!(s, "mu = {:?}", self.mu);
        let _ = writeln!(s, "kappa = {:?}", self.kappa);
        if let Some(m) = self.mach {
            let _ = writeln!(s, "mach = {m:?}");
        }
        let _ = writeln!(s, "alpha = {:?}", self.alpha);
        let _ = writeln!(s, "\n[profile]");
        let _ = writeln!(s, "density = {}", format_density(&self.profile.density));
        let _ = writeln!(s, "velocity = {}", format_velocity(&self.profile.velocity));
        let _ = writeln!(s, "temperature = {}", format_temperature(&self.profile.temperature));
        let _ = writeln!(s, "normalize = {}", self.normalize);
        let _ = writeln!(s, "\n[grid]");
        let _ = writeln!(s, "n_cells = {}", self.n_cells);
        let _ = writeln!(s, "\n[time]");
        let _ = writeln!(s, "t_end = {:?}", c.t_end);
        let _ = writeln!(s, "dt_init = {:?}", c.dt_init);
        let _ = writeln!(s, "dt_min = {:?}", c.dt_min);
        let _ = writeln!(s, "dt_max = {:?}", c.dt_max);
        let _ = writeln!(s, "cfl_coeff = {:?}", c.cfl_coeff);
        let _ = writeln!(s, "scheme = {}", self.scheme.name());
        let _ = writeln!(s, "coupling = {}", self.coupling.name());
        let _ = writeln!(s, "\n[output]");
        let _ = writeln!(s, "dir = {}", self.output_dir.display());
        let _ = writeln!(s, "record_every = {}", self.record_every);
        let _ = writeln!(s, "snapshot_every = {}", self.snapshot_every);
        let _ = writeln!(s, "\n[verify]");
        let _ = writeln!(s, "bound_factor = {:?}", self.bound_factor);
        if let Some(f) = self.frak_c1 {
            let _ = writeln!(s, "frak_c1 = {f:?}");
        }
        s
    }
}

/// Parses a configuration document, applying defaults and validating ranges.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut section = String::new();
    let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (index, raw) in text.lines().enumerate() {
        let line_no = index + 1;
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| config_error(Some(line_no), line, "malformed section header"))?
                .trim();
            if !KEYS.iter().any(|k| k.split('.').next() == Some(name)) {
                return Err(config_error(Some(line_no), name, "unknown section"));
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| config_error(Some(line_no), line, "expected key = value"))?;
        let key = key.trim();
        let path = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
        let path = canonical_key(&path).to_string();
        if !KEYS.contains(&path.as_str()) {
            return Err(config_error(Some(line_no), &path, "unknown key"));
        }
        if let Some((first, _)) = entries.get(&path) {
            return Err(config_error(Some(line_no), &path, format!("duplicate key (first set on line {first})")));
        }
        entries.insert(path, (line_no, value.trim().to_string()));
    }

    let mut config = RunConfig::default();
    // The preset first, so that explicit profile keys override it.
    let ordered = entries
        .iter()
        .filter(|(k, _)| k.as_str() == "profile.preset")
        .chain(entries.iter().filter(|(k, _)| k.as_str() != "profile.preset"));
    for (key, (line, value)) in ordered {
        config.apply(key, value).map_err(|m| config_error(Some(*line), key, m))?;
    }
    for key in KEYS {
        let line = entries.get(key).map(|e| e.0);
        config.check_key(key).map_err(|m| config_error(line, key, m))?;
    }
    config.validate()?;
    Ok(config)
}
