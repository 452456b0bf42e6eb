//! Grids of independent simulations: detuning scans, Fano-factor scans,
//! splitting variants and time evolutions, plus the named configurations
//! used by the command-line presets.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::integrator::{final_state_system, IntegrationError, IntegratorConfig, IntegratorStats};
use crate::model::{DensityMatrix, Detuning, FanoMode, PulseParams, System, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepVariable {
    /// Δp = Δs = value, meV.
    DetuningBoth,
    /// Fano factor ε = value with η = ε·√(Γ13·Γ14).
    Epsilon,
    /// ω43 = value, meV, fields kept at the doublet midpoint.
    Splitting,
    /// Integration end time = value, meV⁻¹.
    TimeEvolution,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            Self::DetuningBoth => "detuning",
            Self::Epsilon => "epsilon",
            Self::Splitting => "splitting",
            Self::TimeEvolution => "time",
        }
    }
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepVariable {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "detuning" => Ok(Self::DetuningBoth),
            "epsilon" => Ok(Self::Epsilon),
            "splitting" => Ok(Self::Splitting),
            "time" => Ok(Self::TimeEvolution),
            other => Err(format!("unknown sweep variable `{other}`")),
        }
    }
}

/// Everything a single simulation needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub params: SystemParams<f64>,
    pub pulses: PulseParams<f64>,
    pub detuning: Detuning<f64>,
    pub integrator: IntegratorConfig<f64>,
    pub initial: DensityMatrix<f64>,
}

impl Scenario {
    /// Reference structure (k = −0.70, q = 0.90, ω43 = 11.76 meV) with fields
    /// at the doublet midpoint and the electron starting in `|1⟩`.
    pub fn reference() -> Self {
        let params = SystemParams::reference();
        Self {
            params,
            pulses: PulseParams::reference(),
            detuning: Detuning::midpoint(params.omega43),
            integrator: IntegratorConfig::default(),
            initial: DensityMatrix::ground(),
        }
    }

    /// Reference scenario with a different splitting and dipole ratios,
    /// re-tuned to the new midpoint.
    pub fn with_doublet(omega43: f64, k: f64, q: f64) -> Self {
        let mut s = Self::reference();
        s.params.omega43 = omega43;
        s.params.k = k;
        s.params.q = q;
        s.detuning = Detuning::midpoint(omega43);
        s
    }

    pub fn system(&self) -> Result<System<f64>, IntegrationError> {
        Ok(System::new(self.params, self.pulses, self.detuning)?)
    }

    pub fn final_state(&self) -> Result<(DensityMatrix<f64>, IntegratorStats), IntegrationError> {
        final_state_system(&self.system()?, &self.initial, &self.integrator)
    }
}

/// Caption (k, q) attached to one splitting value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplittingOverride {
    pub omega43: f64,
    pub k: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
    pub base: Scenario,
    pub overrides: Vec<SplittingOverride>,
}

impl SweepSpec {
    pub fn new(variable: SweepVariable, grid: Vec<f64>, base: Scenario) -> Self {
        Self { variable, grid, base, overrides: Vec::new() }
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        let bad = |msg: String| Err(SweepError::InvalidSpec(msg));
        if self.grid.is_empty() {
            return bad("grid is empty".into());
        }
        if let Some(x) = self.grid.iter().find(|x| !x.is_finite()) {
            return bad(format!("grid value {x} is not finite"));
        }
        if let Some(w) = self.grid.windows(2).find(|w| w[1] <= w[0]) {
            return bad(format!("grid is not strictly increasing at {} -> {}", w[0], w[1]));
        }
        if !self.overrides.is_empty() && self.variable != SweepVariable::Splitting {
            return bad("(k, q) overrides only apply to splitting sweeps".into());
        }
        if self.variable == SweepVariable::TimeEvolution && self.grid[0] < self.base.integrator.t_start {
            return bad(format!("time grid starts before t_start = {}", self.base.integrator.t_start));
        }
        Ok(())
    }

    /// Scenario simulated at one grid value.
    pub fn scenario_at(&self, value: f64) -> Scenario {
        let mut s = self.base;
        match self.variable {
            SweepVariable::DetuningBoth => s.detuning = Detuning::new(value, value),
            SweepVariable::Epsilon => s.params.fano_mode = FanoMode::TargetEpsilon(value),
            SweepVariable::Splitting => {
                s.params.omega43 = value;
                s.detuning = Detuning::midpoint(value);
                if let Some(o) =
                    self.overrides.iter().find(|o| (o.omega43 - value).abs() <= 1e-9 * value.abs().max(1.0))
                {
                    s.params.k = o.k;
                    s.params.q = o.q;
                }
            }
            SweepVariable::TimeEvolution => s.integrator.t_end = value,
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    /// Final ρ11, ρ22, ρ33, ρ44.
    pub populations: [f64; 4],
    /// Largest |trace − 1| seen during the run.
    pub trace_drift: f64,
    pub stats: IntegratorStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub variable: SweepVariable,
    pub rows: Vec<SweepRow>,
    pub base: Scenario,
}

impl SweepResult {
    pub fn column(&self, subband: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.populations[subband - 1]).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.value).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error("invalid sweep: {0}")]
    InvalidSpec(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("sweep point {index} ({variable} = {value}) failed: {source}")]
    PointFailed {
        index: usize,
        value: f64,
        variable: SweepVariable,
        source: IntegrationError,
        /// Rows for every grid point before the failing one.
        partial: Box<SweepResult>,
    },
}

fn run_point(spec: &SweepSpec, value: f64) -> Result<SweepRow, IntegrationError> {
    let scenario = spec.scenario_at(value);
    if spec.variable == SweepVariable::TimeEvolution && value == scenario.integrator.t_start {
        scenario.system()?;
        let rho = scenario.initial;
        return Ok(SweepRow {
            value,
            populations: rho.populations(),
            trace_drift: (rho.trace() - 1.0).abs(),
            stats: IntegratorStats::default(),
        });
    }
    let (rho, stats) = scenario.final_state()?;
    Ok(SweepRow { value, populations: rho.populations(), trace_drift: stats.max_trace_drift, stats })
}

/// Runs every grid point on `threads` workers (1 = in the calling thread).
///
/// Rows come back in grid order and are bit-identical for any thread count.
pub fn run_sweep(spec: &SweepSpec, threads: usize) -> Result<SweepResult, SweepError> {
    spec.validate()?;
    let outcomes: Vec<Result<SweepRow, IntegrationError>> = if threads <= 1 {
        spec.grid.iter().map(|&v| run_point(spec, v)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| SweepError::InvalidSpec(format!("cannot start {threads} workers: {e}")))?;
        pool.install(|| spec.grid.par_iter().map(|&v| run_point(spec, v)).collect())
    };

    let mut rows = Vec::with_capacity(outcomes.len());
    for (index, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(row) => rows.push(row),
            Err(source) => {
                return Err(SweepError::PointFailed {
                    index,
                    value: spec.grid[index],
                    variable: spec.variable,
                    source,
                    partial: Box::new(SweepResult { variable: spec.variable, rows, base: spec.base }),
                })
            }
        }
    }
    Ok(SweepResult { variable: spec.variable, rows, base: spec.base })
}

/// `n` evenly spaced points from `start` to `end` inclusive.
pub fn linspace(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n).map(|i| if i + 1 == n { end } else { start + (end - start) * i as f64 / (n - 1) as f64 }).collect(),
    }
}

/// Points in a detuning scan; spans both one-photon resonances.
pub const DETUNING_POINTS: usize = 301;
/// Points in a Fano-factor scan over [0, 1].
pub const EPSILON_POINTS: usize = 101;
/// Samples of a time-evolution preset over [0, 100] meV⁻¹.
pub const TIME_POINTS: usize = 21;

/// Doublet variants: (ω43, k, q) for narrow, reference and wide splitting.
pub const SPLITTING_VARIANTS: [SplittingOverride; 3] = [
    SplittingOverride { omega43: 5.93, k: -0.59, q: 1.20 },
    SplittingOverride { omega43: 11.76, k: -0.70, q: 0.90 },
    SplittingOverride { omega43: 25.38, k: -0.61, q: 0.56 },
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    Fig2a,
    Fig2b,
    Fig3a,
    Fig3b,
    /// The three splitting variants as a single splitting sweep.
    Fig3,
    Fig4a,
    Fig4b,
    Fig4c,
    Fig5,
}

impl Preset {
    pub const ALL: [Preset; 9] = [
        Preset::Fig2a,
        Preset::Fig2b,
        Preset::Fig3a,
        Preset::Fig3b,
        Preset::Fig3,
        Preset::Fig4a,
        Preset::Fig4b,
        Preset::Fig4c,
        Preset::Fig5,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig2a => "fig2a",
            Preset::Fig2b => "fig2b",
            Preset::Fig3a => "fig3a",
            Preset::Fig3b => "fig3b",
            Preset::Fig3 => "fig3",
            Preset::Fig4a => "fig4a",
            Preset::Fig4b => "fig4b",
            Preset::Fig4c => "fig4c",
            Preset::Fig5 => "fig5",
        }
    }

    pub fn spec(self) -> SweepSpec {
        let [narrow, reference, wide] = SPLITTING_VARIANTS;
        let doublet = |o: SplittingOverride| Scenario::with_doublet(o.omega43, o.k, o.q);
        let time =
            |base: Scenario| SweepSpec::new(SweepVariable::TimeEvolution, linspace(0.0, 100.0, TIME_POINTS), base);
        let detuning = |o: SplittingOverride| {
            SweepSpec::new(
                SweepVariable::DetuningBoth,
                linspace(-o.omega43, 2.0 * o.omega43, DETUNING_POINTS),
                doublet(o),
            )
        };
        match self {
            Preset::Fig2a => time(doublet(reference)),
            Preset::Fig2b => {
                let mut base = doublet(reference);
                base.params.k = 0.70;
                time(base)
            }
            Preset::Fig3a => time(doublet(narrow)),
            Preset::Fig3b => time(doublet(wide)),
            Preset::Fig3 => SweepSpec {
                variable: SweepVariable::Splitting,
                grid: SPLITTING_VARIANTS.iter().map(|o| o.omega43).collect(),
                base: doublet(reference),
                overrides: SPLITTING_VARIANTS.to_vec(),
            },
            Preset::Fig4a => detuning(narrow),
            Preset::Fig4b => detuning(reference),
            Preset::Fig4c => detuning(wide),
            Preset::Fig5 => {
                SweepSpec::new(SweepVariable::Epsilon, linspace(0.0, 1.0, EPSILON_POINTS), doublet(reference))
            }
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = SweepError;

    fn from_str(s: &str) -> Result<Self, SweepError> {
        Preset::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| SweepError::UnknownPreset(s.to_string()))
    }
}

pub fn preset(name: &str) -> Result<SweepSpec, SweepError> {
    Ok(name.parse::<Preset>()?.spec())
}
