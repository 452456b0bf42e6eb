//! Adiabatic-passage analysis of the lossless four-subband system: mixing
//! angles, the two dark states available at midpoint tuning, the geometric
//! phase accumulated between them, and the coherent Hamiltonian those
//! statements refer to.
//!
//! Basis convention: the Hamiltonian here is the one whose commutator
//! `−i[H, ρ]` reproduces the coherent part of [`crate::model::rhs`]. In that
//! basis the second dark state carries `−(cos φ/√2)(|3⟩ − |4⟩)`; the
//! opposite sign corresponds to the gauge `|3⟩, |4⟩ → −|3⟩, −|4⟩` and
//! leaves every population unchanged.

use num_complex::Complex;
use thiserror::Error;

use crate::model::{self, rabi_envelope, DecayTable, DensityMatrix, Detuning, PulseParams, SystemParams};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("mixing angle theta is undefined when both Rabi frequencies vanish")]
    BothZero,
    #[error("mixing angle phi is indeterminate: omega43 > 0 with both Rabi frequencies zero")]
    Indeterminate,
    #[error("quadrature did not converge: estimate {estimate}, error {error:e} after {intervals} intervals")]
    QuadratureNonconvergence { estimate: f64, error: f64, intervals: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingAngles<T> {
    pub theta: T,
    pub phi: T,
}

/// Pure state over the four subbands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector<T>(pub [Complex<T>; 4]);

impl<T: Real> StateVector<T> {
    pub fn from_real(amps: [T; 4]) -> Self {
        Self(amps.map(|a| Complex::new(a, T::zero())))
    }

    pub fn basis(index: usize) -> Self {
        let mut v = [T::zero(); 4];
        v[index - 1] = T::one();
        Self::from_real(v)
    }

    pub fn amplitudes(&self) -> &[Complex<T>; 4] {
        &self.0
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        self.0.iter().zip(other.0.iter()).fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a.conj() * b)
    }

    pub fn norm(&self) -> T {
        self.inner(self).re.sqrt()
    }

    pub fn probabilities(&self) -> [T; 4] {
        self.0.map(|a| a.norm_sqr())
    }

    pub fn to_density(&self) -> DensityMatrix<T> {
        DensityMatrix::from_pure(&self.0)
    }
}

/// θ with tan θ = Ωp/Ωs.
pub fn mixing_theta<T: Real>(omega_p: T, omega_s: T) -> Result<T, AnalysisError> {
    if omega_p == T::zero() && omega_s == T::zero() {
        return Err(AnalysisError::BothZero);
    }
    Ok(omega_p.atan2(omega_s))
}

/// φ with tan φ = (ω43/2) / √(2(Ωs² + Ωp²)).
pub fn mixing_phi<T: Real>(omega_p: T, omega_s: T, omega43: T) -> Result<T, AnalysisError> {
    if omega43 == T::zero() {
        return Ok(T::zero());
    }
    if omega_p == T::zero() && omega_s == T::zero() {
        return Err(AnalysisError::Indeterminate);
    }
    Ok(phi_unchecked(omega_p, omega_s, omega43))
}

fn phi_unchecked<T: Real>(omega_p: T, omega_s: T, omega43: T) -> T {
    let rabi = (T::two() * (omega_s * omega_s + omega_p * omega_p)).sqrt();
    (omega43 * T::half()).atan2(rabi)
}

pub fn mixing_angles<T: Real>(omega_p: T, omega_s: T, omega43: T) -> Result<MixingAngles<T>, AnalysisError> {
    Ok(MixingAngles { theta: mixing_theta(omega_p, omega_s)?, phi: mixing_phi(omega_p, omega_s, omega43)? })
}

/// `cos θ |1⟩ − sin θ |2⟩`, dark for any two-photon-resonant tuning.
pub fn dark_state_phi0<T: Real>(theta: T) -> StateVector<T> {
    StateVector::from_real([theta.cos(), -theta.sin(), T::zero(), T::zero()])
}

/// Second dark state at midpoint tuning with unit dipole ratios:
/// `sin θ sin φ |1⟩ + cos θ sin φ |2⟩ − (cos φ/√2)(|3⟩ − |4⟩)`.
pub fn dark_state_phi1<T: Real>(theta: T, phi: T) -> StateVector<T> {
    let upper = phi.cos() / T::SQRT_2();
    StateVector::from_real([theta.sin() * phi.sin(), theta.cos() * phi.sin(), -upper, upper])
}

/// `sin γ_f |1⟩ − cos γ_f |2⟩`, the state left behind after the pulses.
pub fn asymptotic_state<T: Real>(gamma_f: T) -> StateVector<T> {
    StateVector::from_real([gamma_f.sin(), -gamma_f.cos(), T::zero(), T::zero()])
}

/// ln(Ωp/Ωs) at time `t`, linear in `t` for Gaussian envelopes of equal width.
fn log_ratio<T: Real>(t: T, pulses: &PulseParams<T>) -> T {
    let tau2 = pulses.tau * pulses.tau;
    (pulses.omega_p0 / pulses.omega_s0).ln()
        + (pulses.t_p - pulses.t_s) * (T::two() * t - pulses.t_p - pulses.t_s) / tau2
}

fn theta_is_constant<T: Real>(pulses: &PulseParams<T>) -> bool {
    pulses.omega_p0 == T::zero() || pulses.omega_s0 == T::zero() || pulses.t_p == pulses.t_s
}

/// θ(t) for the Gaussian pair, evaluated from the envelope ratio so that it
/// stays defined in the far tails where both envelopes underflow.
pub fn pulse_theta<T: Real>(t: T, pulses: &PulseParams<T>) -> Result<T, AnalysisError> {
    if theta_is_constant(pulses) {
        return mixing_theta(pulses.omega_p0, pulses.omega_s0);
    }
    Ok(log_ratio(t, pulses).exp().atan())
}

/// dθ/dt from the analytic derivative of the envelope ratio.
pub fn theta_rate<T: Real>(t: T, pulses: &PulseParams<T>) -> T {
    if theta_is_constant(pulses) {
        return T::zero();
    }
    let slope = T::two() * (pulses.t_p - pulses.t_s) / (pulses.tau * pulses.tau);
    slope / (T::two() * log_ratio(t, pulses).cosh())
}

/// φ(t) along the pulse pair; tends to π/2 in the tails when ω43 > 0.
pub fn pulse_phi<T: Real>(t: T, pulses: &PulseParams<T>, omega43: T) -> T {
    let (op, os) = rabi_envelope(t, pulses);
    phi_unchecked(op, os, omega43)
}

/// Integrand of the geometric phase, (dθ/dt)·sin φ.
pub fn berry_integrand<T: Real>(t: T, pulses: &PulseParams<T>, omega43: T) -> T {
    if omega43 == T::zero() {
        return T::zero();
    }
    theta_rate(t, pulses) * pulse_phi(t, pulses, omega43).sin()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig<T> {
    pub abs_tol: T,
    pub rel_tol: T,
    pub max_intervals: usize,
    /// Integration window; `None` derives it from where dθ/dt is non-negligible.
    pub window: Option<(T, T)>,
}

impl<T: Real> Default for QuadratureConfig<T> {
    fn default() -> Self {
        Self { abs_tol: T::lit(1e-13), rel_tol: T::lit(1e-12), max_intervals: 2000, window: None }
    }
}

/// |ln(Ωp/Ωs)| at the window edges; dθ/dt is below e^-60 of its peak there.
const WINDOW_LOG_RATIO: f64 = 60.0;

/// Interval outside which θ is constant to well below f64 resolution.
pub fn berry_window<T: Real>(pulses: &PulseParams<T>) -> Option<(T, T)> {
    if theta_is_constant(pulses) {
        return None;
    }
    let slope = T::two() * (pulses.t_p - pulses.t_s) / (pulses.tau * pulses.tau);
    let centre = (pulses.t_p + pulses.t_s) * T::half() - (pulses.omega_p0 / pulses.omega_s0).ln() / slope;
    let half_width = T::lit(WINDOW_LOG_RATIO) / slope.abs();
    Some((centre - half_width, centre + half_width))
}

/// Geometric phase γ_f = ∫ (dθ/dt) sin φ dt over the whole pulse sequence.
pub fn berry_phase<T: Real>(
    pulses: &PulseParams<T>,
    omega43: T,
    quad: &QuadratureConfig<T>,
) -> Result<T, AnalysisError> {
    if omega43 == T::zero() {
        return Ok(T::zero());
    }
    let Some((lo, hi)) = quad.window.or_else(|| berry_window(pulses)) else {
        return Ok(T::zero());
    };
    integrate_adaptive(|t| berry_integrand(t, pulses, omega43), lo, hi, quad)
}

/// Gauss–Kronrod 7/15 nodes on [-1, 1] (non-negative half) and weights.
const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
/// Gauss weights for the odd Kronrod nodes (indices 1, 3, 5, 7).
const G_WEIGHTS: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

fn gauss_kronrod<T: Real>(f: &impl Fn(T) -> T, a: T, b: T) -> (T, T) {
    let centre = (a + b) * T::half();
    let half = (b - a) * T::half();
    let mut kronrod = T::zero();
    let mut gauss = T::zero();
    for (n, (&x, &w)) in GK_NODES.iter().zip(GK_WEIGHTS.iter()).enumerate() {
        let pair = if x == 0.0 {
            f(centre)
        } else {
            let dx = half * T::lit(x);
            f(centre - dx) + f(centre + dx)
        };
        kronrod += T::lit(w) * pair;
        if n % 2 == 1 {
            gauss += T::lit(G_WEIGHTS[n / 2]) * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Globally adaptive Gauss–Kronrod: bisect the worst interval until the
/// summed error estimate meets the tolerance.
pub(crate) fn integrate_adaptive<T: Real>(
    f: impl Fn(T) -> T,
    a: T,
    b: T,
    quad: &QuadratureConfig<T>,
) -> Result<T, AnalysisError> {
    if a == b {
        return Ok(T::zero());
    }
    let (value, error) = gauss_kronrod(&f, a, b);
    let mut intervals = vec![(a, b, value, error)];
    loop {
        let total: T = intervals.iter().fold(T::zero(), |s, iv| s + iv.2);
        let err: T = intervals.iter().fold(T::zero(), |s, iv| s + iv.3);
        if err <= quad.abs_tol.max(quad.rel_tol * total.abs()) {
            return Ok(total);
        }
        if intervals.len() >= quad.max_intervals {
            return Err(AnalysisError::QuadratureNonconvergence {
                estimate: total.to_f64().unwrap_or(f64::NAN),
                error: err.to_f64().unwrap_or(f64::NAN),
                intervals: intervals.len(),
            });
        }
        let worst = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.partial_cmp(&y.1 .3).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(n, _)| n)
            .unwrap();
        let (lo, hi, _, _) = intervals.swap_remove(worst);
        let mid = (lo + hi) * T::half();
        let (v1, e1) = gauss_kronrod(&f, lo, mid);
        let (v2, e2) = gauss_kronrod(&f, mid, hi);
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
}

/// One row of the adiabatic picture along the pulse sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdiabaticPoint<T> {
    pub t: T,
    pub theta: T,
    pub phi: T,
    /// Geometric phase accumulated up to `t`.
    pub gamma_f: T,
    /// |⟨1|Ψ⟩|² and |⟨2|Ψ⟩|² of the asymptotic state built from `gamma_f`.
    pub weight1: T,
    pub weight2: T,
}

/// θ, φ and the running geometric phase at each of `times` (ascending).
pub fn adiabatic_timeline<T: Real>(
    pulses: &PulseParams<T>,
    omega43: T,
    times: &[T],
    quad: &QuadratureConfig<T>,
) -> Result<Vec<AdiabaticPoint<T>>, AnalysisError> {
    let window = quad.window.or_else(|| berry_window(pulses));
    let mut gamma = T::zero();
    let mut reached = window.map(|w| w.0);
    let mut rows = Vec::with_capacity(times.len());
    for &t in times {
        if let (Some((_, hi)), Some(from)) = (window, reached) {
            let to = t.min(hi);
            if to > from && omega43 != T::zero() {
                gamma += integrate_adaptive(|s| berry_integrand(s, pulses, omega43), from, to, quad)?;
                reached = Some(to);
            }
        }
        let state = asymptotic_state(gamma).probabilities();
        rows.push(AdiabaticPoint {
            t,
            theta: pulse_theta(t, pulses)?,
            phi: pulse_phi(t, pulses, omega43),
            gamma_f: gamma,
            weight1: state[0],
            weight2: state[1],
        });
    }
    Ok(rows)
}

/// Real symmetric 4×4 matrix, meV.
pub type Hamiltonian<T> = [[T; 4]; 4];

/// Rotating-frame Hamiltonian of the driven four-subband system, with the
/// sign convention fixed by `ρ̇ = −i[H, ρ]` matching the coherent terms of
/// the equations of motion.
pub fn coherent_hamiltonian<T: Real>(
    params: &SystemParams<T>,
    omega_p: T,
    omega_s: T,
    det: &Detuning<T>,
) -> Hamiltonian<T> {
    let z = T::zero();
    let (dp, ds) = (det.delta_p, det.delta_s);
    let h13 = -omega_p;
    let h14 = -params.k * omega_p;
    let h23 = -omega_s;
    let h24 = -params.q * omega_s;
    [[z, z, h13, h14], [z, -(dp - ds), h23, h24], [h13, h23, -dp, z], [h14, h24, z, -(dp - params.omega43)]]
}

pub fn apply_hamiltonian<T: Real>(h: &Hamiltonian<T>, v: &StateVector<T>) -> StateVector<T> {
    StateVector(std::array::from_fn(|i| {
        (0..4).fold(Complex::new(T::zero(), T::zero()), |acc, j| acc + v.0[j] * h[i][j])
    }))
}

/// `−i[H, ρ]` as an upper-triangle derivative.
pub fn commutator_term<T: Real>(h: &Hamiltonian<T>, rho: &DensityMatrix<T>) -> DensityMatrix<T> {
    let m = rho.to_matrix();
    let minus_i = -Complex::<T>::i();
    let c = |i: usize, j: usize| {
        let mut acc = Complex::new(T::zero(), T::zero());
        for n in 0..4 {
            acc += m[n][j] * h[i][n] - m[i][n] * h[n][j];
        }
        minus_i * acc
    };
    DensityMatrix {
        rho11: c(0, 0).re,
        rho22: c(1, 1).re,
        rho33: c(2, 2).re,
        rho44: c(3, 3).re,
        rho12: c(0, 1),
        rho13: c(0, 2),
        rho14: c(0, 3),
        rho23: c(1, 2),
        rho24: c(1, 3),
        rho34: c(2, 3),
    }
}

/// Coherent part of the equations of motion at given Rabi frequencies
/// (all decay, dephasing and Fano terms off).
pub fn lossless_rhs<T: Real>(
    params: &SystemParams<T>,
    omega_p: T,
    omega_s: T,
    det: &Detuning<T>,
    rho: &DensityMatrix<T>,
) -> DensityMatrix<T> {
    let lossless = SystemParams::lossless(params.k, params.q, params.omega43);
    let table = DecayTable {
        total12: T::zero(),
        total13: T::zero(),
        total14: T::zero(),
        total23: T::zero(),
        total24: T::zero(),
        total34: T::zero(),
        gamma3: T::zero(),
        gamma4: T::zero(),
        eta: T::zero(),
    };
    model::coherent_and_decay_terms(rho, &lossless, &table, omega_p, omega_s, det)
}

/// Smallest |H·v| over unit vectors v in span{|1⟩, |2⟩}. Zero iff some
/// superposition of the lower subbands is dark.
pub fn lower_subspace_min_coupling<T: Real>(h: &Hamiltonian<T>) -> T {
    // Gram matrix of the first two columns.
    let col = |j: usize| [h[0][j], h[1][j], h[2][j], h[3][j]];
    let (a, b) = (col(0), col(1));
    let dot = |x: &[T; 4], y: &[T; 4]| x.iter().zip(y.iter()).fold(T::zero(), |s, (p, q)| s + *p * *q);
    let (g11, g12, g22) = (dot(&a, &a), dot(&a, &b), dot(&b, &b));
    let tr = g11 + g22;
    let det = g11 * g22 - g12 * g12;
    let disc = (tr * tr - T::lit(4.0) * det).max(T::zero()).sqrt();
    ((tr - disc) * T::half()).max(T::zero()).sqrt()
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    use approx::assert_abs_diff_eq;

    use super::*;

    #[test]
    fn theta_limits() {
        assert_eq!(mixing_theta(0.0, 1.3).unwrap(), 0.0);
        assert_abs_diff_eq!(mixing_theta(2.6, 2.6).unwrap(), FRAC_PI_4, epsilon = 1e-15);
        assert_abs_diff_eq!(mixing_theta(1.3, 0.0).unwrap(), FRAC_PI_2, epsilon = 1e-15);
        assert_eq!(mixing_theta(0.0, 0.0), Err(AnalysisError::BothZero));
    }

    #[test]
    fn phi_values() {
        assert_eq!(mixing_phi(2.6, 2.6, 0.0).unwrap(), 0.0);
        assert!(FRAC_PI_2 - mixing_phi(1e-3, 1e-3, 1e3).unwrap() < 1e-5);
        let hand = (5.88f64 / (2.0f64 * 13.52).sqrt()).atan();
        assert_abs_diff_eq!(mixing_phi(2.6, 2.6, 11.76).unwrap(), hand, epsilon = 1e-15);
        assert_abs_diff_eq!(hand, 0.846_693_125_810_815_4, epsilon = 1e-15);
        assert_eq!(mixing_phi(0.0, 0.0, 1.0), Err(AnalysisError::Indeterminate));
    }

    #[test]
    fn dark_state_shapes() {
        assert_eq!(dark_state_phi0(0.0), StateVector::basis(1));
        let v = dark_state_phi0(FRAC_PI_2);
        assert_abs_diff_eq!(v.0[1].re, -1.0);
        assert_abs_diff_eq!(v.0[0].re, 0.0, epsilon = 1e-16);
        for (theta, phi) in [(0.1, 0.2), (0.7, 1.4), (1.5, 0.01)] {
            let (a, b) = (dark_state_phi0(theta), dark_state_phi1(theta, phi));
            assert_abs_diff_eq!(a.inner(&b).norm(), 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(b.norm(), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn asymptotic_superpositions() {
        let p = asymptotic_state(0.0).probabilities();
        assert_eq!(p, [0.0, 1.0, 0.0, 0.0]);
        assert_eq!(asymptotic_state(0.0).0[1].re, -1.0);
        let p = asymptotic_state(FRAC_PI_2).probabilities();
        assert_abs_diff_eq!(p[0], 1.0);
        assert_abs_diff_eq!(p[1], 0.0, epsilon = 1e-30);
        let p = asymptotic_state(FRAC_PI_4).probabilities();
        assert_abs_diff_eq!(p[0], p[1], epsilon = 1e-15);
    }

    #[test]
    fn theta_rate_matches_finite_difference() {
        let pulses = PulseParams::reference();
        for t in [20.0, 38.0, 40.0, 47.5, 70.0] {
            let h = 1e-5;
            let fd = (pulse_theta(t + h, &pulses).unwrap() - pulse_theta(t - h, &pulses).unwrap()) / (2.0 * h);
            assert_abs_diff_eq!(theta_rate(t, &pulses), fd, epsilon = 1e-9);
            let (op, os) = rabi_envelope(t, &pulses);
            assert_abs_diff_eq!(pulse_theta(t, &pulses).unwrap(), mixing_theta(op, os).unwrap(), epsilon = 1e-14);
        }
    }

    #[test]
    fn berry_limits() {
        let pulses = PulseParams::<f64>::reference();
        let quad = QuadratureConfig::default();
        assert_eq!(berry_phase(&pulses, 0.0, &quad).unwrap(), 0.0);
        let far = berry_phase(&pulses, 100.0 * pulses.omega_p0, &quad).unwrap();
        assert!((far - FRAC_PI_2).abs() < 0.01, "{far}");
        let mut same = pulses;
        same.t_p = same.t_s;
        assert_eq!(berry_phase(&same, 11.76, &quad).unwrap(), 0.0);
    }

    #[test]
    fn quadrature_reports_nonconvergence() {
        let quad = QuadratureConfig { abs_tol: 0.0, rel_tol: 0.0, max_intervals: 4, window: None };
        let err = berry_phase(&PulseParams::reference(), 11.76, &quad).unwrap_err();
        assert!(matches!(err, AnalysisError::QuadratureNonconvergence { .. }));
    }

    #[test]
    fn gauss_kronrod_is_exact_on_polynomials() {
        let quad = QuadratureConfig::default();
        let v = integrate_adaptive(|x: f64| x.powi(9) - 3.0 * x * x + 1.0, -1.0, 2.0, &quad).unwrap();
        let exact = (2f64.powi(10) - 1.0) / 10.0 - (8.0 + 1.0) + 3.0;
        assert_abs_diff_eq!(v, exact, epsilon = 1e-12);
    }

    #[test]
    fn timeline_accumulates_to_full_phase() {
        let pulses = PulseParams::reference();
        let quad = QuadratureConfig::default();
        let times: Vec<f64> = (0..=100).map(|n| n as f64).collect();
        let rows = adiabatic_timeline(&pulses, 11.76, &times, &quad).unwrap();
        let full = berry_phase(&pulses, 11.76, &quad).unwrap();
        assert_abs_diff_eq!(rows.last().unwrap().gamma_f, full, epsilon = 1e-10);
        assert!(rows.windows(2).all(|w| w[1].gamma_f >= w[0].gamma_f));
        assert!(rows[0].theta < 1e-3 && rows[100].theta > FRAC_PI_2 - 1e-3);
    }

    #[test]
    fn hamiltonian_without_fields_is_diagonal() {
        let p = SystemParams::reference();
        let h = coherent_hamiltonian(&p, 0.0, 0.0, &Detuning::new(1.0, 0.5));
        for (i, row) in h.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                if i != j {
                    assert_eq!(x, 0.0);
                }
            }
        }
        assert_eq!([h[0][0], h[1][1], h[2][2], h[3][3]], [0.0, -0.5, -1.0, -(1.0 - 11.76)]);
    }

    #[test]
    fn no_dark_lower_superposition_at_reference_ratios() {
        let p = SystemParams::reference();
        let (op, os) = rabi_envelope(40.0, &PulseParams::reference());
        let h = coherent_hamiltonian(&p, op, os, &Detuning::midpoint(p.omega43));
        assert!(lower_subspace_min_coupling(&h) > 0.1);
        let mut equal = p;
        equal.k = 1.0;
        equal.q = 1.0;
        let h = coherent_hamiltonian(&equal, op, os, &Detuning::midpoint(p.omega43));
        assert!(lower_subspace_min_coupling(&h) < 1e-12);
    }
}
