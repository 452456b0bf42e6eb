//! Time propagation of the density matrix.
//!
//! Two explicit schemes are provided: classical fourth-order Runge–Kutta on
//! a uniform grid, and the Dormand–Prince 5(4) embedded pair with an
//! error-per-step controller. Both act on the 16-real flattened state; the
//! trace is a linear invariant of the equations and is therefore preserved
//! by either scheme up to rounding. It is measured, never renormalised.

use thiserror::Error;

use crate::model::{DensityMatrix, Detuning, ModelError, PulseParams, System, SystemParams, STATE_LEN};
use crate::scalar::Real;

/// Smallest adaptive step accepted before giving up, meV⁻¹.
pub const MIN_STEP: f64 = 1e-12;
/// Trace drift beyond which an `f64` run is aborted. Lower-precision scalars
/// use `1000 · machine epsilon` when that is larger.
pub const TRACE_BREACH: f64 = 1e-6;
/// Tolerance on the initial state's trace and populations.
pub const INITIAL_STATE_TOL: f64 = 1e-9;

const SAFETY: f64 = 0.9;
const GROW_MAX: f64 = 5.0;
const SHRINK_MIN: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrationError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid initial state: {0}")]
    InvalidInitialState(String),
    #[error("adaptive step shrank to {step:e} at t = {t}")]
    StepUnderflow { t: f64, step: f64 },
    #[error("trace drifted by {drift:e} at t = {t}")]
    InvariantBreach { t: f64, drift: f64 },
    #[error("state became non-finite at t = {t}")]
    NonFinite { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    FixedRk4,
    AdaptiveRk45,
}

/// Which points of the run end up in the trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// Evenly spaced samples splitting `[t_start, t_end]` into this many
    /// intervals (so `n + 1` samples). For the fixed-step method the samples
    /// snap to the nearest grid step.
    Intervals(usize),
    /// Record every n-th accepted step, plus both endpoints.
    Stride(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig<T> {
    pub method: Method,
    /// Step size for [`Method::FixedRk4`], meV⁻¹.
    pub step: T,
    pub abs_tol: T,
    pub rel_tol: T,
    pub t_start: T,
    pub t_end: T,
    pub sampling: Sampling,
}

impl<T: Real> Default for IntegratorConfig<T> {
    fn default() -> Self {
        Self {
            method: Method::AdaptiveRk45,
            step: T::lit(1e-3),
            abs_tol: T::lit(1e-10),
            rel_tol: T::lit(1e-9),
            t_start: T::zero(),
            t_end: T::lit(100.0),
            sampling: Sampling::Intervals(2000),
        }
    }
}

impl<T: Real> IntegratorConfig<T> {
    pub fn fixed(step: T) -> Self {
        Self { method: Method::FixedRk4, step, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), IntegrationError> {
        let bad = |msg: String| Err(IntegrationError::InvalidConfig(msg));
        if !(self.t_start.is_finite() && self.t_end.is_finite() && self.t_end > self.t_start) {
            return bad(format!("need t_end > t_start, got [{}, {}]", self.t_start, self.t_end));
        }
        if !(self.step > T::zero() && self.step.is_finite()) {
            return bad(format!("step must be positive, got {}", self.step));
        }
        if !(self.abs_tol > T::zero() && self.rel_tol > T::zero()) {
            return bad(format!("tolerances must be positive, got abs {} rel {}", self.abs_tol, self.rel_tol));
        }
        match self.sampling {
            Sampling::Intervals(0) | Sampling::Stride(0) => bad("sampling count must be at least 1".into()),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IntegratorStats {
    /// Accepted steps.
    pub steps: usize,
    /// Rejected adaptive trial steps.
    pub rejected: usize,
    /// Right-hand-side evaluations.
    pub evaluations: usize,
    /// Largest |trace − 1| seen after any accepted step.
    pub max_trace_drift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub samples: Vec<(T, DensityMatrix<T>)>,
    pub system: System<T>,
    pub config: IntegratorConfig<T>,
    pub stats: IntegratorStats,
}

impl<T: Real> Trajectory<T> {
    pub fn last(&self) -> &DensityMatrix<T> {
        &self.samples.last().expect("trajectory is never empty").1
    }

    pub fn times(&self) -> impl Iterator<Item = T> + '_ {
        self.samples.iter().map(|(t, _)| *t)
    }
}

pub fn integrate<T: Real>(
    initial: &DensityMatrix<T>,
    params: &SystemParams<T>,
    pulses: &PulseParams<T>,
    det: &Detuning<T>,
    config: &IntegratorConfig<T>,
) -> Result<Trajectory<T>, IntegrationError> {
    let system = System::new(*params, *pulses, *det)?;
    integrate_system(&system, initial, config)
}

pub fn final_state<T: Real>(
    initial: &DensityMatrix<T>,
    params: &SystemParams<T>,
    pulses: &PulseParams<T>,
    det: &Detuning<T>,
    config: &IntegratorConfig<T>,
) -> Result<DensityMatrix<T>, IntegrationError> {
    let system = System::new(*params, *pulses, *det)?;
    final_state_system(&system, initial, config).map(|(rho, _)| rho)
}

pub fn integrate_system<T: Real>(
    system: &System<T>,
    initial: &DensityMatrix<T>,
    config: &IntegratorConfig<T>,
) -> Result<Trajectory<T>, IntegrationError> {
    let mut samples = Vec::new();
    let stats = propagate(system, initial, config, |t, y| {
        samples.push((t, DensityMatrix::from_vector(y)));
    })?;
    Ok(Trajectory { samples, system: *system, config: *config, stats })
}

/// Final state and run statistics. Takes exactly the same steps as
/// [`integrate_system`], so the result is bit-identical to its last sample.
pub fn final_state_system<T: Real>(
    system: &System<T>,
    initial: &DensityMatrix<T>,
    config: &IntegratorConfig<T>,
) -> Result<(DensityMatrix<T>, IntegratorStats), IntegrationError> {
    let mut last = None;
    let stats = propagate(system, initial, config, |_, y| last = Some(*y))?;
    let y = last.expect("propagate always records the final sample");
    Ok((DensityMatrix::from_vector(&y), stats))
}

fn check_initial<T: Real>(rho: &DensityMatrix<T>) -> Result<(), IntegrationError> {
    let tol = T::lit(INITIAL_STATE_TOL);
    if !rho.is_finite() {
        return Err(IntegrationError::InvalidInitialState("non-finite entries".into()));
    }
    if (rho.trace() - T::one()).abs() > tol {
        return Err(IntegrationError::InvalidInitialState(format!("trace {} is not 1", rho.trace())));
    }
    if let Some(p) = rho.populations().iter().find(|&&p| p < -tol || p > T::one() + tol) {
        return Err(IntegrationError::InvalidInitialState(format!("population {p} outside [0, 1]")));
    }
    Ok(())
}

/// Shared stepping loop. `record` is called for every sample, the first at
/// `t_start` and the last at exactly `t_end`.
fn propagate<T: Real>(
    system: &System<T>,
    initial: &DensityMatrix<T>,
    config: &IntegratorConfig<T>,
    record: impl FnMut(T, &[T; STATE_LEN]),
) -> Result<IntegratorStats, IntegrationError> {
    config.validate()?;
    check_initial(initial)?;
    let f = |t: T, y: &[T; STATE_LEN]| system.derivative_vector(t, y);
    match config.method {
        Method::FixedRk4 => run_fixed(f, initial.to_vector(), config, record),
        Method::AdaptiveRk45 => run_adaptive(f, initial.to_vector(), config, record),
    }
}

struct Monitor {
    stats: IntegratorStats,
}

impl Monitor {
    fn accept<T: Real>(&mut self, t: T, y: &[T; STATE_LEN]) -> Result<(), IntegrationError> {
        self.stats.steps += 1;
        if !y.iter().all(|x| x.is_finite()) {
            return Err(IntegrationError::NonFinite { t: t.to_f64().unwrap_or(f64::NAN) });
        }
        let trace = y[0] + y[1] + y[2] + y[3];
        let drift = (trace - T::one()).abs().to_f64().unwrap_or(f64::INFINITY);
        self.stats.max_trace_drift = self.stats.max_trace_drift.max(drift);
        let limit = TRACE_BREACH.max(1e3 * T::epsilon().to_f64().unwrap_or(0.0));
        if drift > limit {
            return Err(IntegrationError::InvariantBreach { t: t.to_f64().unwrap_or(f64::NAN), drift });
        }
        Ok(())
    }
}

fn axpy<T: Real>(y: &[T; STATE_LEN], h: T, terms: &[(T, &[T; STATE_LEN])]) -> [T; STATE_LEN] {
    std::array::from_fn(|n| {
        let mut acc = T::zero();
        for (c, k) in terms {
            acc += *c * k[n];
        }
        y[n] + h * acc
    })
}

pub(crate) fn rk4_step<T: Real>(
    f: &impl Fn(T, &[T; STATE_LEN]) -> [T; STATE_LEN],
    t: T,
    y: &[T; STATE_LEN],
    h: T,
) -> [T; STATE_LEN] {
    let half = T::half();
    let k1 = f(t, y);
    let k2 = f(t + half * h, &axpy(y, half * h, &[(T::one(), &k1)]));
    let k3 = f(t + half * h, &axpy(y, half * h, &[(T::one(), &k2)]));
    let k4 = f(t + h, &axpy(y, h, &[(T::one(), &k3)]));
    let sixth = T::one() / T::lit(6.0);
    let third = T::one() / T::lit(3.0);
    axpy(y, h, &[(sixth, &k1), (third, &k2), (third, &k3), (sixth, &k4)])
}

fn run_fixed<T: Real>(
    f: impl Fn(T, &[T; STATE_LEN]) -> [T; STATE_LEN],
    mut y: [T; STATE_LEN],
    config: &IntegratorConfig<T>,
    mut record: impl FnMut(T, &[T; STATE_LEN]),
) -> Result<IntegratorStats, IntegrationError> {
    let span = config.t_end - config.t_start;
    let ratio = (span / config.step).to_f64().unwrap_or(f64::INFINITY);
    // A step that divides the window up to rounding is used as given.
    let n_steps = if (ratio - ratio.round()).abs() < 1e-9 * ratio.max(1.0) { ratio.round() } else { ratio.ceil() };
    if !(1.0..=1e12).contains(&n_steps) {
        return Err(IntegrationError::InvalidConfig(format!("fixed step yields {n_steps} steps")));
    }
    let n_steps = n_steps as u64;
    let h = span / T::from_u64(n_steps).unwrap();
    let time_at = |n: u64| {
        if n == n_steps {
            config.t_end
        } else {
            config.t_start + h * T::from_u64(n).unwrap()
        }
    };

    let is_sample: Box<dyn Fn(u64) -> bool> = match config.sampling {
        Sampling::Stride(s) => {
            let s = s as u64;
            Box::new(move |n| n % s == 0 || n == n_steps)
        }
        Sampling::Intervals(m) => {
            let m = m as u128;
            let total = n_steps as u128;
            // step n is sampled iff it is the nearest grid step to some j·N/m
            Box::new(move |n| {
                let n = n as u128;
                let j = (n * m + total / 2) / total;
                j <= m && (j * total + m / 2) / m == n
            })
        }
    };

    let mut monitor = Monitor { stats: IntegratorStats::default() };
    record(config.t_start, &y);
    for n in 0..n_steps {
        let t = time_at(n);
        y = rk4_step(&f, t, &y, h);
        monitor.stats.evaluations += 4;
        let t_next = time_at(n + 1);
        monitor.accept(t_next, &y)?;
        if is_sample(n + 1) {
            record(t_next, &y);
        }
    }
    Ok(monitor.stats)
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

struct DopriStep<T> {
    y: [T; STATE_LEN],
    /// Derivative at the new point (first stage of the next step).
    f_new: [T; STATE_LEN],
    err: [T; STATE_LEN],
}

fn dopri_step<T: Real>(
    f: &impl Fn(T, &[T; STATE_LEN]) -> [T; STATE_LEN],
    t: T,
    y: &[T; STATE_LEN],
    k1: &[T; STATE_LEN],
    h: T,
) -> DopriStep<T> {
    let c = |x: f64| T::lit(x);
    let k2 = f(t + c(C[1]) * h, &axpy(y, h, &[(c(A2[0]), k1)]));
    let k3 = f(t + c(C[2]) * h, &axpy(y, h, &[(c(A3[0]), k1), (c(A3[1]), &k2)]));
    let k4 = f(t + c(C[3]) * h, &axpy(y, h, &[(c(A4[0]), k1), (c(A4[1]), &k2), (c(A4[2]), &k3)]));
    let k5 = f(t + c(C[4]) * h, &axpy(y, h, &[(c(A5[0]), k1), (c(A5[1]), &k2), (c(A5[2]), &k3), (c(A5[3]), &k4)]));
    let k6 =
        f(t + h, &axpy(y, h, &[(c(A6[0]), k1), (c(A6[1]), &k2), (c(A6[2]), &k3), (c(A6[3]), &k4), (c(A6[4]), &k5)]));
    let y5 = axpy(y, h, &[(c(B5[0]), k1), (c(B5[2]), &k3), (c(B5[3]), &k4), (c(B5[4]), &k5), (c(B5[5]), &k6)]);
    let k7 = f(t + h, &y5);
    let ks = [k1, &k2, &k3, &k4, &k5, &k6, &k7];
    let err = std::array::from_fn(|n| {
        let mut e = T::zero();
        for (s, k) in ks.iter().enumerate() {
            e += c(B5[s] - B4[s]) * k[n];
        }
        h * e
    });
    DopriStep { y: y5, f_new: k7, err }
}

fn error_norm<T: Real>(
    err: &[T; STATE_LEN],
    y_old: &[T; STATE_LEN],
    y_new: &[T; STATE_LEN],
    abs_tol: T,
    rel_tol: T,
) -> T {
    let mut sum = T::zero();
    for n in 0..STATE_LEN {
        let scale = abs_tol + rel_tol * y_old[n].abs().max(y_new[n].abs());
        let r = err[n] / scale;
        sum += r * r;
    }
    (sum / T::lit(STATE_LEN as f64)).sqrt()
}

/// Starting step from the size of the solution and its derivative.
fn initial_step<T: Real>(
    f: &impl Fn(T, &[T; STATE_LEN]) -> [T; STATE_LEN],
    t: T,
    y: &[T; STATE_LEN],
    f0: &[T; STATE_LEN],
    config: &IntegratorConfig<T>,
) -> T {
    let zero = [T::zero(); STATE_LEN];
    let d0 = error_norm(y, y, y, config.abs_tol, config.rel_tol);
    let d1 = error_norm(f0, y, y, config.abs_tol, config.rel_tol);
    let mut h0 = if d0 < T::lit(1e-5) || d1 < T::lit(1e-5) { T::lit(1e-6) } else { T::lit(0.01) * d0 / d1 };
    h0 = h0.min(config.t_end - config.t_start);
    let y1 = axpy(y, h0, &[(T::one(), f0)]);
    let f1 = f(t + h0, &y1);
    let df: [T; STATE_LEN] = std::array::from_fn(|n| (f1[n] - f0[n]) / h0);
    let d2 = error_norm(&df, y, y, config.abs_tol, config.rel_tol);
    let _ = zero;
    let h1 = if d1.max(d2) <= T::lit(1e-15) {
        (h0 * T::lit(1e-3)).max(T::lit(1e-6))
    } else {
        (T::lit(0.01) / d1.max(d2)).powf(T::lit(0.2))
    };
    (T::lit(100.0) * h0).min(h1).min(config.t_end - config.t_start)
}

fn run_adaptive<T: Real>(
    f: impl Fn(T, &[T; STATE_LEN]) -> [T; STATE_LEN],
    mut y: [T; STATE_LEN],
    config: &IntegratorConfig<T>,
    mut record: impl FnMut(T, &[T; STATE_LEN]),
) -> Result<IntegratorStats, IntegrationError> {
    let span = config.t_end - config.t_start;
    let (n_targets, stride) = match config.sampling {
        Sampling::Intervals(m) => (m, None),
        Sampling::Stride(s) => (1, Some(s)),
    };
    let target_at = |j: usize| {
        if j >= n_targets {
            config.t_end
        } else {
            config.t_start + span * T::from_usize(j).unwrap() / T::from_usize(n_targets).unwrap()
        }
    };

    let mut monitor = Monitor { stats: IntegratorStats::default() };
    let mut t = config.t_start;
    record(t, &y);

    let mut k1 = f(t, &y);
    let mut h = initial_step(&f, t, &y, &k1, config);
    monitor.stats.evaluations += 2;
    let min_step = T::lit(MIN_STEP);
    let mut next_target = 1;
    let mut since_record = 0usize;

    while next_target <= n_targets {
        let target = target_at(next_target);
        let remaining = target - t;
        // Clip onto the sample time, remembering the controller's choice.
        let landing = h >= remaining * (T::one() - T::lit(1e-12));
        let h_try = if landing { remaining } else { h };
        if h_try < min_step && !landing {
            return Err(IntegrationError::StepUnderflow {
                t: t.to_f64().unwrap_or(f64::NAN),
                step: h_try.to_f64().unwrap_or(f64::NAN),
            });
        }

        let step = dopri_step(&f, t, &y, &k1, h_try);
        monitor.stats.evaluations += 6;
        let err = error_norm(&step.err, &y, &step.y, config.abs_tol, config.rel_tol);
        if !err.is_finite() {
            return Err(IntegrationError::NonFinite { t: t.to_f64().unwrap_or(f64::NAN) });
        }

        if err <= T::one() {
            t = if landing { target } else { t + h_try };
            y = step.y;
            k1 = step.f_new;
            monitor.accept(t, &y)?;
            let factor = if err == T::zero() {
                T::lit(GROW_MAX)
            } else {
                (T::lit(SAFETY) * err.powf(T::lit(-0.2))).min(T::lit(GROW_MAX)).max(T::lit(SHRINK_MIN))
            };
            let proposed = h_try * factor;
            h = if landing { proposed.max(h) } else { proposed };
            since_record += 1;
            if landing {
                record(t, &y);
                next_target += 1;
                since_record = 0;
            } else if let Some(s) = stride {
                if since_record >= s {
                    record(t, &y);
                    since_record = 0;
                }
            }
        } else {
            monitor.stats.rejected += 1;
            let factor = (T::lit(SAFETY) * err.powf(T::lit(-0.2))).min(T::one()).max(T::lit(SHRINK_MIN));
            h = h_try * factor;
            if h < min_step {
                return Err(IntegrationError::StepUnderflow {
                    t: t.to_f64().unwrap_or(f64::NAN),
                    step: h.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
    }
    Ok(monitor.stats)
}
