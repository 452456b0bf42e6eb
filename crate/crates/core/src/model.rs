//! Physical parameters and the density-matrix equations of motion for the
//! four-subband double quantum well.
//!
//! Units are natural (ħ = 1): energies, Rabi frequencies and rates in meV,
//! time in meV⁻¹ (1 meV⁻¹ ≈ 0.6582 ps).
//!
//! Subbands are numbered 1..=4: `|1⟩`, `|2⟩` are the lower subbands, `|3⟩`
//! and `|4⟩` the tunnelling-split excited doublet. The pump couples
//! `|1⟩ ↔ |3⟩,|4⟩` and the Stokes field couples `|2⟩ ↔ |3⟩,|4⟩`.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex;
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("rate `{name}` must be nonnegative and finite, got {value}")]
    InvalidRate { name: &'static str, value: f64 },
    #[error("doublet splitting omega43 must be nonnegative and finite, got {0}")]
    InvalidSplitting(f64),
    #[error("Fano factor epsilon must lie in [0, 1], got {0}")]
    EpsilonOutOfRange(f64),
    #[error("pulse width tau must be positive and finite, got {0}")]
    InvalidPulseWidth(f64),
    #[error("pulse parameter `{name}` is invalid: {value}")]
    InvalidPulse { name: &'static str, value: f64 },
    #[error("detuning `{name}` must be finite, got {value}")]
    InvalidDetuning { name: &'static str, value: f64 },
    #[error("Fano factor is undefined when Gamma13 * Gamma14 = 0")]
    UndefinedEpsilon,
    #[error("parameter `{name}` must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },
}

fn as_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Density matrix stored as its upper triangle.
///
/// Populations are real; the six coherences `ρᵢⱼ` with `i < j` are complex.
/// The lower triangle is never stored: `ρⱼᵢ = conj(ρᵢⱼ)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DensityMatrix<T> {
    pub rho11: T,
    pub rho22: T,
    pub rho33: T,
    pub rho44: T,
    pub rho12: Complex<T>,
    pub rho13: Complex<T>,
    pub rho14: Complex<T>,
    pub rho23: Complex<T>,
    pub rho24: Complex<T>,
    pub rho34: Complex<T>,
}

/// Number of real components in the flattened state vector.
pub const STATE_LEN: usize = 16;

impl<T: Real> DensityMatrix<T> {
    pub fn zero() -> Self {
        Self::default()
    }

    /// All population in subband `index` (1-based).
    ///
    /// # Panics
    /// If `index` is not in `1..=4`.
    pub fn basis(index: usize) -> Self {
        let mut rho = Self::zero();
        match index {
            1 => rho.rho11 = T::one(),
            2 => rho.rho22 = T::one(),
            3 => rho.rho33 = T::one(),
            4 => rho.rho44 = T::one(),
            _ => panic!("subband index must be in 1..=4, got {index}"),
        }
        rho
    }

    /// Electron initially in the lower subband `|1⟩`.
    pub fn ground() -> Self {
        Self::basis(1)
    }

    /// Projector `|ψ⟩⟨ψ|` onto a pure state given by its four amplitudes.
    pub fn from_pure(amps: &[Complex<T>; 4]) -> Self {
        let e = |i: usize, j: usize| amps[i] * amps[j].conj();
        Self {
            rho11: e(0, 0).re,
            rho22: e(1, 1).re,
            rho33: e(2, 2).re,
            rho44: e(3, 3).re,
            rho12: e(0, 1),
            rho13: e(0, 2),
            rho14: e(0, 3),
            rho23: e(1, 2),
            rho24: e(1, 3),
            rho34: e(2, 3),
        }
    }

    /// Matrix element `ρᵢⱼ` with 1-based indices; lower-triangle entries are
    /// conjugates of the stored ones.
    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        let real = |x: T| Complex::new(x, T::zero());
        match (i, j) {
            (1, 1) => real(self.rho11),
            (2, 2) => real(self.rho22),
            (3, 3) => real(self.rho33),
            (4, 4) => real(self.rho44),
            (1, 2) => self.rho12,
            (1, 3) => self.rho13,
            (1, 4) => self.rho14,
            (2, 3) => self.rho23,
            (2, 4) => self.rho24,
            (3, 4) => self.rho34,
            (a, b) if a > b && b >= 1 && a <= 4 => self.get(b, a).conj(),
            _ => panic!("density matrix index out of range: ({i}, {j})"),
        }
    }

    /// Full 4×4 matrix, row-major, 0-based.
    pub fn to_matrix(&self) -> [[Complex<T>; 4]; 4] {
        let mut m = [[Complex::new(T::zero(), T::zero()); 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = self.get(i + 1, j + 1);
            }
        }
        m
    }

    pub fn populations(&self) -> [T; 4] {
        [self.rho11, self.rho22, self.rho33, self.rho44]
    }

    pub fn coherences(&self) -> [Complex<T>; 6] {
        [self.rho12, self.rho13, self.rho14, self.rho23, self.rho24, self.rho34]
    }

    pub fn trace(&self) -> T {
        self.rho11 + self.rho22 + self.rho33 + self.rho44
    }

    /// Flattens to 16 reals: four populations, then (re, im) of
    /// ρ12, ρ13, ρ14, ρ23, ρ24, ρ34.
    pub fn to_vector(&self) -> [T; STATE_LEN] {
        let mut v = [T::zero(); STATE_LEN];
        v[..4].copy_from_slice(&self.populations());
        for (n, c) in self.coherences().iter().enumerate() {
            v[4 + 2 * n] = c.re;
            v[5 + 2 * n] = c.im;
        }
        v
    }

    pub fn from_vector(v: &[T; STATE_LEN]) -> Self {
        let c = |n: usize| Complex::new(v[4 + 2 * n], v[5 + 2 * n]);
        Self {
            rho11: v[0],
            rho22: v[1],
            rho33: v[2],
            rho44: v[3],
            rho12: c(0),
            rho13: c(1),
            rho14: c(2),
            rho23: c(3),
            rho24: c(4),
            rho34: c(5),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|x| x.is_finite())
    }
}

impl<T: Real> Add for DensityMatrix<T> {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        let (a, b) = (self.to_vector(), rhs.to_vector());
        Self::from_vector(&std::array::from_fn(|n| a[n] + b[n]))
    }
}

impl<T: Real> Sub for DensityMatrix<T> {
    type Output = Self;

    fn sub(self, rhs: Self) -> Self {
        let (a, b) = (self.to_vector(), rhs.to_vector());
        Self::from_vector(&std::array::from_fn(|n| a[n] - b[n]))
    }
}

impl<T: Real> Mul<T> for DensityMatrix<T> {
    type Output = Self;

    fn mul(self, s: T) -> Self {
        let a = self.to_vector();
        Self::from_vector(&std::array::from_fn(|n| a[n] * s))
    }
}

/// How the Fano cross-coupling η between `|3⟩` and `|4⟩` is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FanoMode<T> {
    /// η = √(γ3·γ4), from the tunnelling decay rates.
    PhysicalEta,
    /// Fix the interference strength ε directly: η = ε·√(Γ13·Γ14), all
    /// decay and dephasing rates unchanged.
    TargetEpsilon(T),
}

/// Material parameters of the double quantum well.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams<T> {
    /// Dipole ratio μ14/μ13.
    pub k: T,
    /// Dipole ratio μ24/μ23.
    pub q: T,
    /// Splitting of the excited doublet, meV.
    pub omega43: T,
    pub gamma31: T,
    pub gamma32: T,
    pub gamma41: T,
    pub gamma42: T,
    pub gamma2: T,
    pub dph12: T,
    pub dph13: T,
    pub dph14: T,
    pub dph23: T,
    pub dph24: T,
    pub dph34: T,
    pub fano_mode: FanoMode<T>,
}

impl<T: Real> SystemParams<T> {
    /// Structure with the continuum adjacent to the deep well: k = −0.70,
    /// q = 0.90, ω43 = 11.76 meV, γ3 = 1.58 and γ4 = 1.50 meV split equally
    /// between the two lower subbands, and the low-temperature dephasing
    /// estimates.
    pub fn reference() -> Self {
        Self {
            k: T::lit(-0.70),
            q: T::lit(0.90),
            omega43: T::lit(11.76),
            gamma31: T::lit(0.79),
            gamma32: T::lit(0.79),
            gamma41: T::lit(0.75),
            gamma42: T::lit(0.75),
            gamma2: T::lit(2.36e-9),
            dph12: T::lit(0.47e-9),
            dph13: T::lit(0.32),
            dph14: T::lit(0.30),
            dph23: T::lit(0.32),
            dph24: T::lit(0.30),
            dph34: T::lit(0.31),
            fano_mode: FanoMode::PhysicalEta,
        }
    }

    /// Same dipole ratios and splitting with every decay, dephasing and
    /// Fano term switched off.
    pub fn lossless(k: T, q: T, omega43: T) -> Self {
        let z = T::zero();
        Self {
            k,
            q,
            omega43,
            gamma31: z,
            gamma32: z,
            gamma41: z,
            gamma42: z,
            gamma2: z,
            dph12: z,
            dph13: z,
            dph14: z,
            dph23: z,
            dph24: z,
            dph34: z,
            fano_mode: FanoMode::PhysicalEta,
        }
    }

    pub fn gamma3(&self) -> T {
        self.gamma31 + self.gamma32
    }

    pub fn gamma4(&self) -> T {
        self.gamma41 + self.gamma42
    }

    fn rates(&self) -> [(&'static str, T); 11] {
        [
            ("gamma31", self.gamma31),
            ("gamma32", self.gamma32),
            ("gamma41", self.gamma41),
            ("gamma42", self.gamma42),
            ("gamma2", self.gamma2),
            ("dph12", self.dph12),
            ("dph13", self.dph13),
            ("dph14", self.dph14),
            ("dph23", self.dph23),
            ("dph24", self.dph24),
            ("dph34", self.dph34),
        ]
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, value) in [("k", self.k), ("q", self.q)] {
            if !value.is_finite() {
                return Err(ModelError::NonFinite { name, value: as_f64(value) });
            }
        }
        if !(self.omega43 >= T::zero() && self.omega43.is_finite()) {
            return Err(ModelError::InvalidSplitting(as_f64(self.omega43)));
        }
        for (name, value) in self.rates() {
            if !(value >= T::zero() && value.is_finite()) {
                return Err(ModelError::InvalidRate { name, value: as_f64(value) });
            }
        }
        if let FanoMode::TargetEpsilon(eps) = self.fano_mode {
            if !(eps >= T::zero() && eps <= T::one()) {
                return Err(ModelError::EpsilonOutOfRange(as_f64(eps)));
            }
        }
        Ok(())
    }
}

/// Gaussian pump and Stokes envelopes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseParams<T> {
    /// Peak pump Rabi frequency, meV.
    pub omega_p0: T,
    /// Peak Stokes Rabi frequency, meV.
    pub omega_s0: T,
    /// Pulse width, meV⁻¹.
    pub tau: T,
    /// Pump centre, meV⁻¹.
    pub t_p: T,
    /// Stokes centre, meV⁻¹.
    pub t_s: T,
}

impl<T: Real> PulseParams<T> {
    /// Counterintuitive pair: Ωp0 = Ωs0 = 2.6 meV, τ = 10, Ts = 30, Tp = 50.
    pub fn reference() -> Self {
        Self { omega_p0: T::lit(2.6), omega_s0: T::lit(2.6), tau: T::lit(10.0), t_p: T::lit(50.0), t_s: T::lit(30.0) }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.tau > T::zero() && self.tau.is_finite()) {
            return Err(ModelError::InvalidPulseWidth(as_f64(self.tau)));
        }
        for (name, value) in [("omega_p0", self.omega_p0), ("omega_s0", self.omega_s0)] {
            if !(value >= T::zero() && value.is_finite()) {
                return Err(ModelError::InvalidPulse { name, value: as_f64(value) });
            }
        }
        for (name, value) in [("t_p", self.t_p), ("t_s", self.t_s)] {
            if !value.is_finite() {
                return Err(ModelError::InvalidPulse { name, value: as_f64(value) });
            }
        }
        Ok(())
    }
}

/// Rotating-frame detunings Δp = ωp − ω31 and Δs = ωs − ω32, meV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detuning<T> {
    pub delta_p: T,
    pub delta_s: T,
}

impl<T: Real> Detuning<T> {
    pub fn new(delta_p: T, delta_s: T) -> Self {
        Self { delta_p, delta_s }
    }

    /// Both fields tuned halfway between `|3⟩` and `|4⟩`.
    pub fn midpoint(omega43: T) -> Self {
        let d = omega43 * T::half();
        Self { delta_p: d, delta_s: d }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, value) in [("delta_p", self.delta_p), ("delta_s", self.delta_s)] {
            if !value.is_finite() {
                return Err(ModelError::InvalidDetuning { name, value: as_f64(value) });
            }
        }
        Ok(())
    }
}

/// Total decoherence rates Γᵢⱼ, total upper-subband decay rates and the
/// Fano coupling η, all in meV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayTable<T> {
    pub total12: T,
    pub total13: T,
    pub total14: T,
    pub total23: T,
    pub total24: T,
    pub total34: T,
    pub gamma3: T,
    pub gamma4: T,
    pub eta: T,
}

/// Peak Rabi frequencies at time `t`: `(Ωp(t), Ωs(t))`.
pub fn rabi_envelope<T: Real>(t: T, pulses: &PulseParams<T>) -> (T, T) {
    let gauss = |centre: T| {
        let x = (t - centre) / pulses.tau;
        (-x * x).exp()
    };
    (pulses.omega_p0 * gauss(pulses.t_p), pulses.omega_s0 * gauss(pulses.t_s))
}

pub fn total_decay_rates<T: Real>(params: &SystemParams<T>) -> Result<DecayTable<T>, ModelError> {
    params.validate()?;
    let gamma3 = params.gamma3();
    let gamma4 = params.gamma4();
    let g2 = params.gamma2;
    let mut table = DecayTable {
        total12: g2 + params.dph12,
        total13: gamma3 + params.dph13,
        total14: gamma4 + params.dph14,
        total23: g2 + gamma3 + params.dph23,
        total24: g2 + gamma4 + params.dph24,
        total34: gamma3 + gamma4 + params.dph34,
        gamma3,
        gamma4,
        eta: T::zero(),
    };
    let scale = (table.total13 * table.total14).sqrt();
    table.eta = match params.fano_mode {
        FanoMode::PhysicalEta => (gamma3 * gamma4).sqrt(),
        FanoMode::TargetEpsilon(eps) => eps * scale,
    };
    if table.eta > scale * (T::one() + T::lit(EPSILON_SLACK)) {
        return Err(ModelError::EpsilonOutOfRange(as_f64(table.eta / scale)));
    }
    Ok(table)
}

/// Relative rounding drift tolerated above ε = 1 before it counts as
/// unphysical.
const EPSILON_SLACK: f64 = 1e-12;

/// Interference strength ε = η / √(Γ13·Γ14).
pub fn fano_epsilon<T: Real>(table: &DecayTable<T>) -> Result<T, ModelError> {
    let scale = (table.total13 * table.total14).sqrt();
    if scale.is_nan() || scale <= T::zero() {
        return Err(ModelError::UndefinedEpsilon);
    }
    let eps = table.eta / scale;
    if eps > T::one() {
        if eps - T::one() <= T::lit(EPSILON_SLACK) {
            return Ok(T::one());
        }
        return Err(ModelError::EpsilonOutOfRange(as_f64(eps)));
    }
    Ok(eps)
}

/// Time derivative of the density matrix in the rotating frame.
///
/// Linear in `rho`; the population derivatives sum to zero identically.
pub fn rhs<T: Real>(
    t: T,
    rho: &DensityMatrix<T>,
    params: &SystemParams<T>,
    table: &DecayTable<T>,
    pulses: &PulseParams<T>,
    det: &Detuning<T>,
) -> DensityMatrix<T> {
    let (op, os) = rabi_envelope(t, pulses);
    coherent_and_decay_terms(rho, params, table, op, os, det)
}

/// Right-hand side at given instantaneous Rabi frequencies.
pub(crate) fn coherent_and_decay_terms<T: Real>(
    rho: &DensityMatrix<T>,
    params: &SystemParams<T>,
    table: &DecayTable<T>,
    op: T,
    os: T,
    det: &Detuning<T>,
) -> DensityMatrix<T> {
    let i = Complex::<T>::i();
    let re = |x: T| Complex::new(x, T::zero());
    let half = T::half();

    let k = params.k;
    let q = params.q;
    let w43 = params.omega43;
    let (dp, ds) = (det.delta_p, det.delta_s);
    let eta2 = table.eta * half;

    let (r11, r22, r33, r44) = (re(rho.rho11), re(rho.rho22), re(rho.rho33), re(rho.rho44));
    let (r12, r13, r14) = (rho.rho12, rho.rho13, rho.rho14);
    let (r23, r24, r34) = (rho.rho23, rho.rho24, rho.rho34);
    let (r21, r31, r41) = (r12.conj(), r13.conj(), r14.conj());
    let (r32, r42, r43) = (r23.conj(), r24.conj(), r34.conj());

    let fano = (r34 + r43) * eta2;

    let d11 = i * k * op * (r41 - r14)
        + i * op * (r31 - r13)
        + r44 * params.gamma41
        + r33 * params.gamma31
        + r22 * params.gamma2
        + fano;
    let d22 = i * q * os * (r42 - r24) + i * os * (r32 - r23) + r44 * params.gamma42 + r33 * params.gamma32
        - r22 * params.gamma2
        + fano;
    let d33 = i * op * (r13 - r31) + i * os * (r23 - r32) - r33 * table.gamma3 - fano;
    let d44 = i * k * op * (r14 - r41) + i * q * os * (r24 - r42) - r44 * table.gamma4 - fano;

    let d12 = -(i * (dp - ds) + re(table.total12 * half)) * r12 + i * k * op * r42 + i * op * r32
        - i * q * os * r14
        - i * os * r13;
    let d13 = -(i * dp + re(table.total13 * half)) * r13 + i * k * op * r43 - i * os * r12 + i * op * (r33 - r11)
        - r14 * eta2;
    let d14 = -(i * (dp - w43) + re(table.total14 * half)) * r14 + i * op * r34 - i * q * os * r12
        + i * k * op * (r44 - r11)
        - r13 * eta2;
    let d23 = -(i * ds + re(table.total23 * half)) * r23 - i * op * r21 + i * q * os * r43 + i * os * (r33 - r22)
        - r24 * eta2;
    let d24 = -(i * (ds - w43) + re(table.total24 * half)) * r24 - i * k * op * r21 + i * os * r34
        - i * q * os * (r22 - r44)
        - r23 * eta2;
    let d34 = -(-i * w43 + re(table.total34 * half)) * r34 - i * k * op * r31 + i * op * r14 - i * q * os * r32
        + i * os * r24
        - (r33 + r44) * eta2;

    DensityMatrix {
        rho11: d11.re,
        rho22: d22.re,
        rho33: d33.re,
        rho44: d44.re,
        rho12: d12,
        rho13: d13,
        rho14: d14,
        rho23: d23,
        rho24: d24,
        rho34: d34,
    }
}

/// Validated bundle of everything the equations of motion depend on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct System<T> {
    pub params: SystemParams<T>,
    pub table: DecayTable<T>,
    pub pulses: PulseParams<T>,
    pub detuning: Detuning<T>,
}

impl<T: Real> System<T> {
    pub fn new(params: SystemParams<T>, pulses: PulseParams<T>, detuning: Detuning<T>) -> Result<Self, ModelError> {
        pulses.validate()?;
        detuning.validate()?;
        let table = total_decay_rates(&params)?;
        Ok(Self { params, table, pulses, detuning })
    }

    pub fn derivative(&self, t: T, rho: &DensityMatrix<T>) -> DensityMatrix<T> {
        rhs(t, rho, &self.params, &self.table, &self.pulses, &self.detuning)
    }

    /// Flattened form of [`System::derivative`] used by the integrators.
    pub fn derivative_vector(&self, t: T, y: &[T; STATE_LEN]) -> [T; STATE_LEN] {
        self.derivative(t, &DensityMatrix::from_vector(y)).to_vector()
    }
}
