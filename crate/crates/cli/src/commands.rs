//! The four subcommands. Each returns its text output; writing files and
//! choosing exit codes is left to the caller.

use std::fmt::Write as _;

use num_complex::Complex64;
use qwsim::analysis::{
    adiabatic_timeline, apply_hamiltonian, berry_phase, coherent_hamiltonian, commutator_term, dark_state_phi0,
    dark_state_phi1, mixing_phi, mixing_theta,
};
use qwsim::integrator::{final_state_system, integrate_system};
use qwsim::sweep::linspace;
use qwsim::{
    fano_epsilon, rabi_envelope, rhs, run_sweep, total_decay_rates, AnalysisError, DensityMatrix64, Detuning64,
    IntegrationError, IntegratorConfig, IntegratorStats, Method, QuadratureConfig, Sampling, SweepError,
    SystemParams64,
};
use thiserror::Error;

use crate::config::{serialize, ConfigError, RunConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Integration(String),
    #[error("{0}")]
    InvariantBreach(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Io(_) => 1,
            RunError::Integration(_) => 2,
            RunError::InvariantBreach(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Config(ConfigError::Parse { .. }) => "parse",
            RunError::Config(ConfigError::UnknownKey { .. }) => "unknown_key",
            RunError::Config(ConfigError::Range { .. }) => "range",
            RunError::Io(_) => "io",
            RunError::Integration(_) => "integration",
            RunError::InvariantBreach(_) => "invariant",
        }
    }

    /// Single-line, machine-readable form for standard error.
    pub fn error_line(&self) -> String {
        format!("error kind={} exit={} message={:?}", self.kind(), self.exit_code(), self.to_string())
    }
}

impl From<IntegrationError> for RunError {
    fn from(e: IntegrationError) -> Self {
        match e {
            IntegrationError::InvariantBreach { .. } => RunError::InvariantBreach(e.to_string()),
            IntegrationError::Model(_)
            | IntegrationError::InvalidConfig(_)
            | IntegrationError::InvalidInitialState(_) => {
                RunError::Config(ConfigError::Range { key: "config".into(), message: e.to_string() })
            }
            IntegrationError::StepUnderflow { .. } | IntegrationError::NonFinite { .. } => {
                RunError::Integration(e.to_string())
            }
        }
    }
}

impl From<SweepError> for RunError {
    fn from(e: SweepError) -> Self {
        let message = e.to_string();
        match e {
            SweepError::InvalidSpec(_) | SweepError::UnknownPreset(_) => {
                RunError::Config(ConfigError::Range { key: "sweep".into(), message })
            }
            SweepError::PointFailed { source, .. } => match RunError::from(source) {
                RunError::InvariantBreach(_) => RunError::InvariantBreach(message),
                RunError::Config(_) => RunError::Config(ConfigError::Range { key: "sweep".into(), message }),
                _ => RunError::Integration(message),
            },
        }
    }
}

impl From<AnalysisError> for RunError {
    fn from(e: AnalysisError) -> Self {
        RunError::Integration(e.to_string())
    }
}

/// Data file contents plus the metadata sidecar.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub csv: String,
    pub metadata: String,
}

pub const EVOLVE_HEADER: &str = "t,rho11,rho22,rho33,rho44,re_rho12,im_rho12,re_rho13,im_rho13,re_rho14,im_rho14,\
re_rho23,im_rho23,re_rho24,im_rho24,re_rho34,im_rho34,trace";
pub const SWEEP_HEADER: &str = "sweep_value,rho11,rho22,rho33,rho44,trace_drift";
pub const ANALYZE_HEADER: &str = "t,theta,phi,gamma_f,c1_sq,c2_sq";

/// Twelve significant digits in scientific notation.
pub fn sci(x: f64) -> String {
    format!("{x:.11e}")
}

fn csv_row(values: &[f64]) -> String {
    let mut line = values.iter().map(|&x| sci(x)).collect::<Vec<_>>().join(",");
    line.push('\n');
    line
}

fn metadata(config: &RunConfig, extra: &[(&str, String)]) -> String {
    let mut out = serialize(config);
    let _ = writeln!(out, "# qwsim {}", env!("CARGO_PKG_VERSION"));
    for (key, value) in extra {
        let _ = writeln!(out, "# {key} = {value}");
    }
    out
}

fn stats_fields(stats: &IntegratorStats) -> Vec<(&'static str, String)> {
    vec![
        ("steps", stats.steps.to_string()),
        ("rejected", stats.rejected.to_string()),
        ("evaluations", stats.evaluations.to_string()),
        ("max_trace_drift", sci(stats.max_trace_drift)),
    ]
}

pub fn cmd_evolve(config: &RunConfig) -> Result<Output, RunError> {
    let s = &config.scenario;
    let traj = integrate_system(&s.system()?, &s.initial, &s.integrator)?;
    let mut csv = format!("{EVOLVE_HEADER}\n");
    for (t, rho) in &traj.samples {
        let mut row = vec![*t];
        row.extend(rho.populations());
        for c in rho.coherences() {
            row.extend([c.re, c.im]);
        }
        row.push(rho.trace());
        csv.push_str(&csv_row(&row));
    }
    let mut extra = vec![("samples_written", traj.samples.len().to_string())];
    extra.extend(stats_fields(&traj.stats));
    Ok(Output { csv, metadata: metadata(config, &extra) })
}

pub fn cmd_sweep(config: &RunConfig, threads: usize) -> Result<Output, RunError> {
    let result = run_sweep(&config.sweep_spec(), threads)?;
    let mut csv = format!("{SWEEP_HEADER}\n");
    let mut total = IntegratorStats::default();
    for row in &result.rows {
        let mut values = vec![row.value];
        values.extend(row.populations);
        values.push(row.trace_drift);
        csv.push_str(&csv_row(&values));
        total.steps += row.stats.steps;
        total.rejected += row.stats.rejected;
        total.evaluations += row.stats.evaluations;
        total.max_trace_drift = total.max_trace_drift.max(row.trace_drift);
    }
    let mut extra = vec![("points", result.rows.len().to_string())];
    extra.extend(stats_fields(&total));
    Ok(Output { csv, metadata: metadata(config, &extra) })
}

/// Intervals used by `analyze` when the run samples by stride.
const ANALYZE_INTERVALS: usize = 2000;

/// Sample times for `analyze`: the integrator's sample count over its window.
fn analysis_times(config: &RunConfig) -> Vec<f64> {
    let it = &config.scenario.integrator;
    let intervals = match it.sampling {
        Sampling::Intervals(n) => n,
        Sampling::Stride(_) => ANALYZE_INTERVALS,
    };
    linspace(it.t_start, it.t_end, intervals + 1)
}

pub fn cmd_analyze(config: &RunConfig) -> Result<Output, RunError> {
    let s = &config.scenario;
    let quad = QuadratureConfig::default();
    let rows = adiabatic_timeline(&s.pulses, s.params.omega43, &analysis_times(config), &quad)?;
    let mut csv = format!("{ANALYZE_HEADER}\n");
    for r in &rows {
        csv.push_str(&csv_row(&[r.t, r.theta, r.phi, r.gamma_f, r.weight1, r.weight2]));
    }
    let gamma = berry_phase(&s.pulses, s.params.omega43, &quad)?;
    let extra = [("gamma_f_total", sci(gamma)), ("predicted_rho22", sci(gamma.cos().powi(2)))];
    Ok(Output { csv, metadata: metadata(config, &extra) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub outcomes: Vec<CheckOutcome>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    pub fn failures(&self) -> Vec<&'static str> {
        self.outcomes.iter().filter(|o| !o.passed).map(|o| o.name).collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for o in &self.outcomes {
            let _ = writeln!(out, "{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
        }
        let _ =
            writeln!(out, "{} of {} checks passed", self.outcomes.len() - self.failures().len(), self.outcomes.len());
        out
    }
}

const TRACE_TOL: f64 = 1e-9;
const POSITIVITY_TOL: f64 = 1e-9;
const METHOD_TOL: f64 = 1e-7;
const ORACLE_TOL: f64 = 1e-12;
const NULLITY_TOL: f64 = 1e-10;
const DETERMINISM_POINTS: usize = 4;
const DETERMINISM_WORKERS: usize = 4;

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed, detail }
}

fn failed(name: &'static str, e: impl std::fmt::Display) -> CheckOutcome {
    outcome(name, false, e.to_string())
}

fn check_rates(config: &RunConfig) -> CheckOutcome {
    let name = "decay rates";
    match total_decay_rates(&config.scenario.params) {
        Err(e) => failed(name, e),
        Ok(t) => {
            let all = [t.total12, t.total13, t.total14, t.total23, t.total24, t.total34, t.eta];
            let finite = all.iter().all(|x| x.is_finite() && *x >= 0.0);
            let eps = fano_epsilon(&t).map_or("undefined".to_string(), |e| format!("{e:.6}"));
            outcome(name, finite, format!("Gamma34 = {:.6}, eta = {:.6}, epsilon = {eps}", t.total34, t.eta))
        }
    }
}

/// Trace, populations and 2×2 principal minors along the configured run.
fn check_evolution(config: &RunConfig) -> CheckOutcome {
    let name = "physical state along the run";
    let s = &config.scenario;
    let traj = match s.system().and_then(|sys| integrate_system(&sys, &s.initial, &s.integrator)) {
        Ok(t) => t,
        Err(e) => return failed(name, e),
    };
    let mut worst_minor = 0.0f64;
    let mut worst_population = 0.0f64;
    for (_, rho) in &traj.samples {
        for p in rho.populations() {
            worst_population = worst_population.max(-p).max(p - 1.0);
        }
        for i in 1..=4 {
            for j in i + 1..=4 {
                let excess = rho.get(i, j).norm_sqr() - rho.get(i, i).re * rho.get(j, j).re;
                worst_minor = worst_minor.max(excess);
            }
        }
    }
    let drift = traj.stats.max_trace_drift;
    outcome(
        name,
        drift < TRACE_TOL && worst_population < POSITIVITY_TOL && worst_minor < POSITIVITY_TOL,
        format!(
            "max trace drift {drift:.3e}, population excursion {worst_population:.3e}, minor excess {worst_minor:.3e}"
        ),
    )
}

fn check_methods(config: &RunConfig) -> CheckOutcome {
    let name = "fixed and adaptive integrators agree";
    let s = &config.scenario;
    let run = |method: Method| {
        let cfg = IntegratorConfig { method, ..s.integrator };
        s.system().and_then(|sys| final_state_system(&sys, &s.initial, &cfg)).map(|(rho, _)| rho.populations())
    };
    match (run(Method::FixedRk4), run(Method::AdaptiveRk45)) {
        (Ok(a), Ok(b)) => {
            let diff = a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            outcome(name, diff < METHOD_TOL, format!("max final population difference {diff:.3e}"))
        }
        (Err(e), _) | (_, Err(e)) => failed(name, e),
    }
}

/// Fixed mixed states spread over the whole space, no randomness needed.
fn probe_states() -> Vec<DensityMatrix64> {
    let pure = |n: usize| {
        let amps: [Complex64; 4] =
            std::array::from_fn(|j| Complex64::from_polar(1.0 + ((n + j) % 3) as f64, 0.7 * n as f64 + 1.3 * j as f64));
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        DensityMatrix64::from_pure(&amps.map(|a| a / norm))
    };
    (0..16).map(|n| pure(n) * 0.7 + pure(n + 5) * 0.3).collect()
}

fn check_coherent_oracle(config: &RunConfig) -> CheckOutcome {
    let name = "commutator matches the coherent equations";
    let s = &config.scenario;
    let p = SystemParams64::lossless(s.params.k, s.params.q, s.params.omega43);
    let table = match total_decay_rates(&p) {
        Ok(t) => t,
        Err(e) => return failed(name, e),
    };
    let mut worst = 0.0f64;
    for (n, rho) in probe_states().iter().enumerate() {
        let t = s.integrator.t_start + (s.integrator.t_end - s.integrator.t_start) * n as f64 / 15.0;
        let (op, os) = rabi_envelope(t, &s.pulses);
        let a = commutator_term(&coherent_hamiltonian(&p, op, os, &s.detuning), rho).to_vector();
        let b = rhs(t, rho, &p, &table, &s.pulses, &s.detuning).to_vector();
        worst = worst.max(a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
    }
    outcome(name, worst < ORACLE_TOL, format!("max elementwise difference {worst:.3e}"))
}

/// Both dark states of the lossless k = q = 1 system at the configured
/// splitting and pulse peak ratio.
fn check_dark_states(config: &RunConfig) -> CheckOutcome {
    let name = "dark states are null vectors";
    let s = &config.scenario;
    let w = s.params.omega43;
    let t = 0.5 * (s.pulses.t_p + s.pulses.t_s);
    let (op, os) = rabi_envelope(t, &s.pulses);
    let angles = mixing_theta(op, os).and_then(|theta| Ok((theta, mixing_phi(op, os, w)?)));
    let (theta, phi) = match angles {
        Ok(a) => a,
        Err(AnalysisError::BothZero) => return outcome(name, true, "skipped: both pulses vanish".into()),
        Err(e) => return failed(name, e),
    };
    let h = coherent_hamiltonian(&SystemParams64::lossless(1.0, 1.0, w), op, os, &Detuning64::midpoint(w));
    let worst = apply_hamiltonian(&h, &dark_state_phi0(theta))
        .norm()
        .max(apply_hamiltonian(&h, &dark_state_phi1(theta, phi)).norm());
    outcome(name, worst < NULLITY_TOL, format!("max |H v| = {worst:.3e} at t = {t}"))
}

fn check_determinism(config: &RunConfig) -> CheckOutcome {
    let name = "sweep rows independent of worker count";
    let mut spec = config.sweep_spec();
    let n = spec.grid.len();
    let picks: Vec<usize> =
        (0..DETERMINISM_POINTS.min(n)).map(|i| i * (n - 1) / (DETERMINISM_POINTS - 1).max(1)).collect();
    spec.grid = picks.iter().map(|&i| spec.grid[i]).collect();
    spec.grid.dedup();
    match (run_sweep(&spec, 1), run_sweep(&spec, DETERMINISM_WORKERS)) {
        (Ok(a), Ok(b)) => {
            outcome(name, a == b, format!("{} points, 1 vs {DETERMINISM_WORKERS} workers", spec.grid.len()))
        }
        (Err(e), _) | (_, Err(e)) => failed(name, e),
    }
}

/// Runs the invariant suite against the configured scenario.
pub fn cmd_check(config: &RunConfig) -> CheckReport {
    CheckReport {
        outcomes: vec![
            check_rates(config),
            check_evolution(config),
            check_methods(config),
            check_coherent_oracle(config),
            check_dark_states(config),
            check_determinism(config),
        ],
    }
}
