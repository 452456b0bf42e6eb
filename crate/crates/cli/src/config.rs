//! Flat `key = value` run configuration.
//!
//! A file holds one assignment per line; `#` starts a comment. Values are
//! decimal numbers, integers or bare identifiers. All energies and rates are
//! in meV and all times in meV⁻¹ (ħ = 1).
//!
//! Resolution order: global defaults, then the preset (from `--preset` or the
//! `preset` key), then every other key in the file, then `--set` overrides.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use qwsim::sweep::{linspace, DETUNING_POINTS, EPSILON_POINTS, SPLITTING_VARIANTS, TIME_POINTS};
use qwsim::{DensityMatrix64, FanoMode, Method, Preset, Sampling, Scenario, SweepSpec, SweepVariable};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("`{key}`: {message}")]
    Range { key: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Evolve,
    Sweep,
    Analyze,
    Check,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Evolve => "evolve",
            Command::Sweep => "sweep",
            Command::Analyze => "analyze",
            Command::Check => "check",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        [Command::Evolve, Command::Sweep, Command::Analyze, Command::Check]
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command `{s}`"))
    }
}

/// Fully resolved configuration of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Option<Preset>,
    pub command: Option<Command>,
    pub scenario: Scenario,
    pub sweep: SweepVariable,
    /// Unset grid fields fall back to the default grid of the sweep variable.
    pub grid_start: Option<f64>,
    pub grid_end: Option<f64>,
    pub grid_points: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::from_preset(Preset::Fig2a, None)
    }
}

impl RunConfig {
    fn from_preset(p: Preset, name: Option<Preset>) -> Self {
        let spec = p.spec();
        Self {
            preset: name,
            command: None,
            scenario: spec.base,
            sweep: spec.variable,
            grid_start: None,
            grid_end: None,
            grid_points: None,
        }
    }

    pub fn preset(p: Preset) -> Self {
        Self::from_preset(p, Some(p))
    }

    fn has_explicit_grid(&self) -> bool {
        self.grid_start.is_some() || self.grid_end.is_some() || self.grid_points.is_some()
    }

    /// Grid used when no grid key is given.
    fn default_grid(&self) -> Vec<f64> {
        let s = &self.scenario;
        match self.sweep {
            SweepVariable::TimeEvolution => linspace(s.integrator.t_start, s.integrator.t_end, TIME_POINTS),
            SweepVariable::Epsilon => linspace(0.0, 1.0, EPSILON_POINTS),
            SweepVariable::DetuningBoth => {
                let w = s.params.omega43;
                linspace(-w, 2.0 * w, DETUNING_POINTS)
            }
            SweepVariable::Splitting => SPLITTING_VARIANTS.iter().map(|o| o.omega43).collect(),
        }
    }

    /// Sweep described by this configuration. The default splitting grid
    /// carries the per-variant dipole ratios; an explicit grid does not.
    pub fn sweep_spec(&self) -> SweepSpec {
        let default = self.default_grid();
        let mut spec = SweepSpec::new(self.sweep, default.clone(), self.scenario);
        if self.has_explicit_grid() {
            let start = self.grid_start.unwrap_or(default[0]);
            let end = self.grid_end.unwrap_or(default[default.len() - 1]);
            let points = self.grid_points.unwrap_or(default.len());
            spec.grid = linspace(start, end, points);
        } else if self.sweep == SweepVariable::Splitting {
            spec.overrides = SPLITTING_VARIANTS.to_vec();
        }
        spec
    }

    /// Cross-field checks that single-key parsing cannot make.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.scenario;
        let range = |key: &str, e: &dyn fmt::Display| ConfigError::Range { key: key.into(), message: e.to_string() };
        s.params.validate().map_err(|e| range("system", &e))?;
        s.pulses.validate().map_err(|e| range("pulses", &e))?;
        s.detuning.validate().map_err(|e| range("detuning", &e))?;
        s.integrator.validate().map_err(|e| range("integrator", &e))?;
        if self.grid_points == Some(0) {
            return Err(range("grid_points", &"must be at least 1"));
        }
        self.sweep_spec().validate().map_err(|e| range("grid", &e))
    }
}

/// Every key a configuration file may contain, in serialization order.
pub const KEYS: [&str; 37] = [
    "preset",
    "command",
    "k",
    "q",
    "omega43",
    "gamma31",
    "gamma32",
    "gamma41",
    "gamma42",
    "gamma2",
    "dph12",
    "dph13",
    "dph14",
    "dph23",
    "dph24",
    "dph34",
    "epsilon",
    "omega_p0",
    "omega_s0",
    "tau",
    "t_p",
    "t_s",
    "delta_p",
    "delta_s",
    "initial",
    "method",
    "step",
    "abs_tol",
    "rel_tol",
    "t_start",
    "t_end",
    "samples",
    "sample_stride",
    "sweep",
    "grid_start",
    "grid_end",
    "grid_points",
];

/// Where an assignment came from, for error messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Origin {
    Line(usize),
    Flag,
}

impl Origin {
    fn line(self) -> usize {
        match self {
            Origin::Line(n) => n,
            Origin::Flag => 0,
        }
    }
}

struct Assignment {
    origin: Origin,
    key: String,
    value: String,
}

fn is_identifier(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '-' || c == '+')
}

fn split_assignment(origin: Origin, text: &str) -> Result<Option<Assignment>, ConfigError> {
    let body = text.split('#').next().unwrap_or("").trim();
    if body.is_empty() {
        return Ok(None);
    }
    let parse_err = |message: String| ConfigError::Parse { line: origin.line(), message };
    let (key, value) =
        body.split_once('=').ok_or_else(|| parse_err(format!("expected `key = value`, got `{body}`")))?;
    let (key, value) = (key.trim(), value.trim());
    if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(parse_err(format!("malformed key `{key}`")));
    }
    if !is_identifier(value) {
        return Err(parse_err(format!("malformed value `{value}` for `{key}`")));
    }
    if !KEYS.contains(&key) {
        return Err(ConfigError::UnknownKey { line: origin.line(), key: key.into() });
    }
    Ok(Some(Assignment { origin, key: key.into(), value: value.into() }))
}

fn lex(text: &str) -> Result<Vec<Assignment>, ConfigError> {
    let mut out: Vec<Assignment> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if let Some(a) = split_assignment(Origin::Line(n + 1), line)? {
            if let Some(prev) = out.iter().find(|p| p.key == a.key) {
                return Err(ConfigError::Parse {
                    line: n + 1,
                    message: format!("`{}` already set on line {}", a.key, prev.origin.line()),
                });
            }
            out.push(a);
        }
    }
    Ok(out)
}

fn number(a: &Assignment) -> Result<f64, ConfigError> {
    let x: f64 = a.value.parse().map_err(|_| ConfigError::Parse {
        line: a.origin.line(),
        message: format!("`{}` expects a number, got `{}`", a.key, a.value),
    })?;
    if !x.is_finite() {
        return Err(ConfigError::Range { key: a.key.clone(), message: format!("must be finite, got {}", a.value) });
    }
    Ok(x)
}

fn count(a: &Assignment) -> Result<usize, ConfigError> {
    let n: usize = a.value.parse().map_err(|_| ConfigError::Parse {
        line: a.origin.line(),
        message: format!("`{}` expects a nonnegative integer, got `{}`", a.key, a.value),
    })?;
    if n == 0 {
        return Err(ConfigError::Range { key: a.key.clone(), message: "must be at least 1".into() });
    }
    Ok(n)
}

fn nonnegative(a: &Assignment) -> Result<f64, ConfigError> {
    let x = number(a)?;
    if x < 0.0 {
        return Err(ConfigError::Range { key: a.key.clone(), message: format!("must be nonnegative, got {x}") });
    }
    Ok(x)
}

fn positive(a: &Assignment) -> Result<f64, ConfigError> {
    let x = number(a)?;
    if x <= 0.0 {
        return Err(ConfigError::Range { key: a.key.clone(), message: format!("must be positive, got {x}") });
    }
    Ok(x)
}

fn word<T: FromStr>(a: &Assignment, expected: &str) -> Result<T, ConfigError> {
    a.value.parse().map_err(|_| ConfigError::Parse {
        line: a.origin.line(),
        message: format!("`{}` expects {expected}, got `{}`", a.key, a.value),
    })
}

fn apply(c: &mut RunConfig, a: &Assignment) -> Result<(), ConfigError> {
    let s = &mut c.scenario;
    let p = &mut s.params;
    match a.key.as_str() {
        "command" => c.command = Some(word(a, "evolve, sweep, analyze or check")?),
        "k" => p.k = number(a)?,
        "q" => p.q = number(a)?,
        "omega43" => p.omega43 = nonnegative(a)?,
        "gamma31" => p.gamma31 = nonnegative(a)?,
        "gamma32" => p.gamma32 = nonnegative(a)?,
        "gamma41" => p.gamma41 = nonnegative(a)?,
        "gamma42" => p.gamma42 = nonnegative(a)?,
        "gamma2" => p.gamma2 = nonnegative(a)?,
        "dph12" => p.dph12 = nonnegative(a)?,
        "dph13" => p.dph13 = nonnegative(a)?,
        "dph14" => p.dph14 = nonnegative(a)?,
        "dph23" => p.dph23 = nonnegative(a)?,
        "dph24" => p.dph24 = nonnegative(a)?,
        "dph34" => p.dph34 = nonnegative(a)?,
        "epsilon" if a.value == "physical" => p.fano_mode = FanoMode::PhysicalEta,
        "epsilon" => {
            let eps = number(a)?;
            if !(0.0..=1.0).contains(&eps) {
                return Err(ConfigError::Range {
                    key: a.key.clone(),
                    message: format!("must lie in [0, 1], got {eps}"),
                });
            }
            p.fano_mode = FanoMode::TargetEpsilon(eps);
        }
        "omega_p0" => s.pulses.omega_p0 = nonnegative(a)?,
        "omega_s0" => s.pulses.omega_s0 = nonnegative(a)?,
        "tau" => s.pulses.tau = positive(a)?,
        "t_p" => s.pulses.t_p = number(a)?,
        "t_s" => s.pulses.t_s = number(a)?,
        "delta_p" => s.detuning.delta_p = number(a)?,
        "delta_s" => s.detuning.delta_s = number(a)?,
        "initial" => {
            let n: usize = word(a, "a subband index 1-4")?;
            if !(1..=4).contains(&n) {
                return Err(ConfigError::Range {
                    key: a.key.clone(),
                    message: format!("subband must be 1-4, got {n}"),
                });
            }
            s.initial = DensityMatrix64::basis(n);
        }
        "method" => {
            s.integrator.method = match a.value.as_str() {
                "rk4" => Method::FixedRk4,
                "rk45" => Method::AdaptiveRk45,
                _ => {
                    return Err(ConfigError::Parse {
                        line: a.origin.line(),
                        message: format!("`method` expects rk4 or rk45, got `{}`", a.value),
                    })
                }
            }
        }
        "step" => s.integrator.step = positive(a)?,
        "abs_tol" => s.integrator.abs_tol = positive(a)?,
        "rel_tol" => s.integrator.rel_tol = positive(a)?,
        "t_start" => s.integrator.t_start = number(a)?,
        "t_end" => s.integrator.t_end = number(a)?,
        "samples" => s.integrator.sampling = Sampling::Intervals(count(a)?),
        "sample_stride" => s.integrator.sampling = Sampling::Stride(count(a)?),
        "sweep" => c.sweep = word(a, "detuning, epsilon, splitting or time")?,
        "grid_start" => c.grid_start = Some(number(a)?),
        "grid_end" => c.grid_end = Some(number(a)?),
        "grid_points" => c.grid_points = Some(count(a)?),
        other => unreachable!("key `{other}` is listed but not handled"),
    }
    Ok(())
}

/// Parses a configuration file on its own.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    load_config(text, None, &[])
}

/// Parses a configuration file, then applies a `--preset` flag (which
/// replaces any `preset` key) and `--set key=value` overrides.
pub fn load_config(text: &str, preset_flag: Option<&str>, sets: &[String]) -> Result<RunConfig, ConfigError> {
    let mut entries = lex(text)?;
    for s in sets {
        match split_assignment(Origin::Flag, s)? {
            Some(a) => entries.push(a),
            None => {
                return Err(ConfigError::Parse { line: 0, message: format!("empty --set assignment `{s}`") });
            }
        }
    }
    let preset_name = preset_flag
        .map(str::to_string)
        .or_else(|| entries.iter().rev().find(|a| a.key == "preset").map(|a| a.value.clone()));
    let mut config = match preset_name {
        Some(name) => {
            let p: Preset = name.parse().map_err(|e: qwsim::SweepError| ConfigError::Range {
                key: "preset".into(),
                message: format!("{e}; known presets: {}", preset_names()),
            })?;
            RunConfig::preset(p)
        }
        None => RunConfig::default(),
    };
    for a in entries.iter().filter(|a| a.key != "preset") {
        apply(&mut config, a)?;
    }
    config.validate()?;
    Ok(config)
}

fn preset_names() -> String {
    Preset::ALL.iter().map(|p| p.name()).collect::<Vec<_>>().join(", ")
}

/// Writes a configuration that [`parse_config`] reads back unchanged.
pub fn serialize(c: &RunConfig) -> String {
    let s = &c.scenario;
    let p = &s.params;
    let mut out = String::from("# qwsim configuration; energies and rates in meV, times in meV^-1\n");
    let mut put = |key: &str, value: String| {
        let _ = writeln!(out, "{key} = {value}");
    };
    let f = |x: f64| format!("{x:?}");
    if let Some(preset) = c.preset {
        put("preset", preset.name().into());
    }
    if let Some(command) = c.command {
        put("command", command.name().into());
    }
    for (key, value) in [
        ("k", p.k),
        ("q", p.q),
        ("omega43", p.omega43),
        ("gamma31", p.gamma31),
        ("gamma32", p.gamma32),
        ("gamma41", p.gamma41),
        ("gamma42", p.gamma42),
        ("gamma2", p.gamma2),
        ("dph12", p.dph12),
        ("dph13", p.dph13),
        ("dph14", p.dph14),
        ("dph23", p.dph23),
        ("dph24", p.dph24),
        ("dph34", p.dph34),
    ] {
        put(key, f(value));
    }
    put(
        "epsilon",
        match p.fano_mode {
            FanoMode::PhysicalEta => "physical".into(),
            FanoMode::TargetEpsilon(eps) => f(eps),
        },
    );
    for (key, value) in [
        ("omega_p0", s.pulses.omega_p0),
        ("omega_s0", s.pulses.omega_s0),
        ("tau", s.pulses.tau),
        ("t_p", s.pulses.t_p),
        ("t_s", s.pulses.t_s),
        ("delta_p", s.detuning.delta_p),
        ("delta_s", s.detuning.delta_s),
    ] {
        put(key, f(value));
    }
    if let Some(n) = (1..=4).find(|&n| s.initial == DensityMatrix64::basis(n)) {
        put("initial", n.to_string());
    }
    let it = &s.integrator;
    put("method", if it.method == Method::FixedRk4 { "rk4" } else { "rk45" }.into());
    for (key, value) in [
        ("step", it.step),
        ("abs_tol", it.abs_tol),
        ("rel_tol", it.rel_tol),
        ("t_start", it.t_start),
        ("t_end", it.t_end),
    ] {
        put(key, f(value));
    }
    match it.sampling {
        Sampling::Intervals(n) => put("samples", n.to_string()),
        Sampling::Stride(n) => put("sample_stride", n.to_string()),
    }
    put("sweep", c.sweep.name().into());
    if let Some(x) = c.grid_start {
        put("grid_start", f(x));
    }
    if let Some(x) = c.grid_end {
        put("grid_end", f(x));
    }
    if let Some(n) = c.grid_points {
        put("grid_points", n.to_string());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_alone_expands() {
        let c = parse_config("preset = fig2a").unwrap();
        assert_eq!(c.scenario, Preset::Fig2a.spec().base);
        assert_eq!(c.sweep_spec(), Preset::Fig2a.spec());
    }

    #[test]
    fn every_preset_reproduces_its_sweep() {
        for p in Preset::ALL {
            let c = parse_config(&format!("preset = {p}\n")).unwrap();
            assert_eq!(c.sweep_spec(), p.spec(), "{p}");
        }
    }

    #[test]
    fn later_keys_override_the_preset() {
        let c = parse_config("preset = fig2a\nk = 0.70").unwrap();
        assert_eq!(c.scenario, Preset::Fig2b.spec().base);
    }

    #[test]
    fn comments_and_blank_lines() {
        let c = parse_config("# header\n\n  tau = 12   # wider\n\t\n").unwrap();
        assert_eq!(c.scenario.pulses.tau, 12.0);
        assert_eq!(c.preset, None);
    }

    #[test]
    fn errors_are_classified() {
        assert!(matches!(parse_config("gamma2 = -1"), Err(ConfigError::Range { key, .. }) if key == "gamma2"));
        assert!(matches!(parse_config("epsilon = 1.5"), Err(ConfigError::Range { .. })));
        assert!(matches!(parse_config("\n\nfoo = 1"), Err(ConfigError::UnknownKey { line: 3, .. })));
        assert!(matches!(parse_config("k 0.7"), Err(ConfigError::Parse { line: 1, .. })));
        assert!(matches!(parse_config("k = abc"), Err(ConfigError::Parse { .. })));
        assert!(matches!(parse_config("k = 1\nk = 2"), Err(ConfigError::Parse { line: 2, .. })));
        assert!(matches!(parse_config("method = euler"), Err(ConfigError::Parse { .. })));
        assert!(matches!(parse_config("t_end = -5"), Err(ConfigError::Range { .. })));
        assert!(matches!(parse_config("preset = fig9"), Err(ConfigError::Range { .. })));
        assert!(matches!(parse_config("samples = 0"), Err(ConfigError::Range { .. })));
    }

    #[test]
    fn flags_apply_after_the_file() {
        let c = load_config("preset = fig2a\nk = 0.5", Some("fig3a"), &["k=0.25".into(), "sweep = epsilon".into()])
            .unwrap();
        assert_eq!(c.preset, Some(Preset::Fig3a));
        assert_eq!(c.scenario.params.k, 0.25);
        assert_eq!(c.scenario.params.omega43, 5.93);
        assert_eq!(c.sweep_spec().grid.len(), EPSILON_POINTS);
    }

    #[test]
    fn explicit_grid_fills_missing_fields() {
        let c = parse_config("sweep = detuning\ngrid_points = 11").unwrap();
        let g = c.sweep_spec().grid;
        assert_eq!((g.len(), g[0], g[10]), (11, -11.76, 23.52));
        let c = parse_config("preset = fig3\ngrid_start = 2").unwrap();
        assert!(c.sweep_spec().overrides.is_empty());
    }

    #[test]
    fn serialize_round_trips_presets() {
        for p in Preset::ALL {
            let c = RunConfig::preset(p);
            assert_eq!(parse_config(&serialize(&c)).unwrap(), c);
        }
    }
}
