//! Coherent electron population transfer in an asymmetric double quantum
//! well.
//!
//! A four-subband intersubband system (two lower subbands and a
//! tunnelling-split excited doublet sharing a common continuum) is driven by
//! a counterintuitively ordered pair of Gaussian pump and Stokes pulses.
//! The crate integrates the rotating-frame density-matrix equations with
//! phenomenological decay, pure dephasing and Fano cross-coupling, runs
//! parameter sweeps over them, and evaluates the lossless adiabatic picture
//! (dark states, mixing angles, geometric phase) for comparison.
//!
//! The physics modules are generic over [`Real`]; the aliases below fix the
//! scalar to `f64`, which is what the sweep engine and CLI use.

pub mod analysis;
pub mod integrator;
pub mod model;
pub mod scalar;
pub mod sweep;

pub use analysis::{AnalysisError, MixingAngles, QuadratureConfig, StateVector};
pub use integrator::{
    final_state, integrate, IntegrationError, IntegratorConfig, IntegratorStats, Method, Sampling, Trajectory,
};
pub use model::{
    fano_epsilon, rabi_envelope, rhs, total_decay_rates, DecayTable, DensityMatrix, Detuning, FanoMode, ModelError,
    PulseParams, System, SystemParams,
};
pub use scalar::Real;
pub use sweep::{preset, run_sweep, Preset, Scenario, SweepError, SweepResult, SweepRow, SweepSpec, SweepVariable};

pub type DensityMatrix64 = DensityMatrix<f64>;
pub type SystemParams64 = SystemParams<f64>;
pub type PulseParams64 = PulseParams<f64>;
pub type Detuning64 = Detuning<f64>;
pub type DecayTable64 = DecayTable<f64>;
pub type IntegratorConfig64 = IntegratorConfig<f64>;
pub type Trajectory64 = Trajectory<f64>;
pub type StateVector64 = StateVector<f64>;

pub type DensityMatrix32 = DensityMatrix<f32>;
pub type SystemParams32 = SystemParams<f32>;
pub type PulseParams32 = PulseParams<f32>;
pub type IntegratorConfig32 = IntegratorConfig<f32>;
