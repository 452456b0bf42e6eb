#![allow(dead_code)]

use num_complex::Complex64 as C;
use qwsim::{DensityMatrix64, Detuning64, PulseParams64, SystemParams64};

pub type Mat = [[C; 4]; 4];

/// Random Hermitian, positive, unit-trace matrix from 32 raw numbers.
pub fn density_from_raw(raw: &[f64]) -> DensityMatrix64 {
    let a: Mat = std::array::from_fn(|i| std::array::from_fn(|j| C::new(raw[8 * i + 2 * j], raw[8 * i + 2 * j + 1])));
    let m: Mat =
        std::array::from_fn(|i| std::array::from_fn(|j| a[i].iter().zip(a[j].iter()).map(|(x, y)| x * y.conj()).sum()));
    let tr: f64 = (0..4).map(|i| m[i][i].re).sum();
    DensityMatrix64 {
        rho11: m[0][0].re / tr,
        rho22: m[1][1].re / tr,
        rho33: m[2][2].re / tr,
        rho44: m[3][3].re / tr,
        rho12: m[0][1] / tr,
        rho13: m[0][2] / tr,
        rho14: m[0][3] / tr,
        rho23: m[1][2] / tr,
        rho24: m[1][3] / tr,
        rho34: m[2][3] / tr,
    }
}

/// Independent transcription of the equations of motion on a full 4×4
/// matrix with 1-based element access. Returns the ten upper-triangle
/// derivatives in the order 11, 22, 33, 44, 12, 13, 14, 23, 24, 34.
pub fn oracle_upper(
    t: f64,
    rho: &DensityMatrix64,
    p: &SystemParams64,
    eta: f64,
    pulses: &PulseParams64,
    det: &Detuning64,
) -> [C; 10] {
    let m = rho.to_matrix();
    let r = |i: usize, j: usize| m[i - 1][j - 1];
    let i = C::new(0.0, 1.0);
    let op = pulses.omega_p0 * (-((t - pulses.t_p) / pulses.tau).powi(2)).exp();
    let os = pulses.omega_s0 * (-((t - pulses.t_s) / pulses.tau).powi(2)).exp();
    let (k, q, w) = (p.k, p.q, p.omega43);
    let (dp, ds) = (det.delta_p, det.delta_s);
    let g3 = p.gamma31 + p.gamma32;
    let g4 = p.gamma41 + p.gamma42;
    let big12 = p.gamma2 + p.dph12;
    let big13 = g3 + p.dph13;
    let big14 = g4 + p.dph14;
    let big23 = p.gamma2 + g3 + p.dph23;
    let big24 = p.gamma2 + g4 + p.dph24;
    let big34 = g3 + g4 + p.dph34;
    let x = eta / 2.0 * (r(3, 4) + r(4, 3));
    [
        i * k * op * (r(4, 1) - r(1, 4))
            + i * op * (r(3, 1) - r(1, 3))
            + p.gamma41 * r(4, 4)
            + p.gamma31 * r(3, 3)
            + p.gamma2 * r(2, 2)
            + x,
        i * q * os * (r(4, 2) - r(2, 4)) + i * os * (r(3, 2) - r(2, 3)) + p.gamma42 * r(4, 4) + p.gamma32 * r(3, 3)
            - p.gamma2 * r(2, 2)
            + x,
        i * op * (r(1, 3) - r(3, 1)) + i * os * (r(2, 3) - r(3, 2)) - g3 * r(3, 3) - x,
        i * k * op * (r(1, 4) - r(4, 1)) + i * q * os * (r(2, 4) - r(4, 2)) - g4 * r(4, 4) - x,
        -(i * (dp - ds) + big12 / 2.0) * r(1, 2) + i * k * op * r(4, 2) + i * op * r(3, 2)
            - i * q * os * r(1, 4)
            - i * os * r(1, 3),
        -(i * dp + big13 / 2.0) * r(1, 3) + i * k * op * r(4, 3) - i * os * r(1, 2) + i * op * (r(3, 3) - r(1, 1))
            - eta / 2.0 * r(1, 4),
        -(i * (dp - w) + big14 / 2.0) * r(1, 4) + i * op * r(3, 4) - i * q * os * r(1, 2)
            + i * k * op * (r(4, 4) - r(1, 1))
            - eta / 2.0 * r(1, 3),
        -(i * ds + big23 / 2.0) * r(2, 3) - i * op * r(2, 1) + i * q * os * r(4, 3) + i * os * (r(3, 3) - r(2, 2))
            - eta / 2.0 * r(2, 4),
        -(i * (ds - w) + big24 / 2.0) * r(2, 4) - i * k * op * r(2, 1) + i * os * r(3, 4)
            - i * q * os * (r(2, 2) - r(4, 4))
            - eta / 2.0 * r(2, 3),
        -(-i * w + big34 / 2.0) * r(3, 4) - i * k * op * r(3, 1) + i * op * r(1, 4) - i * q * os * r(3, 2)
            + i * os * r(2, 4)
            - eta / 2.0 * (r(3, 3) + r(4, 4)),
    ]
}

/// The conjugated twins of the six coherence equations, written out by hand:
/// derivatives of ρ21, ρ31, ρ41, ρ32, ρ42, ρ43.
pub fn oracle_lower(
    t: f64,
    rho: &DensityMatrix64,
    p: &SystemParams64,
    eta: f64,
    pulses: &PulseParams64,
    det: &Detuning64,
) -> [C; 6] {
    let m = rho.to_matrix();
    let r = |i: usize, j: usize| m[i - 1][j - 1];
    let i = C::new(0.0, 1.0);
    let op = pulses.omega_p0 * (-((t - pulses.t_p) / pulses.tau).powi(2)).exp();
    let os = pulses.omega_s0 * (-((t - pulses.t_s) / pulses.tau).powi(2)).exp();
    let (k, q, w) = (p.k, p.q, p.omega43);
    let (dp, ds) = (det.delta_p, det.delta_s);
    let g3 = p.gamma31 + p.gamma32;
    let g4 = p.gamma41 + p.gamma42;
    let big12 = p.gamma2 + p.dph12;
    let big13 = g3 + p.dph13;
    let big14 = g4 + p.dph14;
    let big23 = p.gamma2 + g3 + p.dph23;
    let big24 = p.gamma2 + g4 + p.dph24;
    let big34 = g3 + g4 + p.dph34;
    [
        -(-i * (dp - ds) + big12 / 2.0) * r(2, 1) - i * k * op * r(2, 4) - i * op * r(2, 3)
            + i * q * os * r(4, 1)
            + i * os * r(3, 1),
        -(-i * dp + big13 / 2.0) * r(3, 1) - i * k * op * r(3, 4) + i * os * r(2, 1)
            - i * op * (r(3, 3) - r(1, 1))
            - eta / 2.0 * r(4, 1),
        -(-i * (dp - w) + big14 / 2.0) * r(4, 1) - i * op * r(4, 3) + i * q * os * r(2, 1)
            - i * k * op * (r(4, 4) - r(1, 1))
            - eta / 2.0 * r(3, 1),
        -(-i * ds + big23 / 2.0) * r(3, 2) + i * op * r(1, 2)
            - i * q * os * r(3, 4)
            - i * os * (r(3, 3) - r(2, 2))
            - eta / 2.0 * r(4, 2),
        -(-i * (ds - w) + big24 / 2.0) * r(4, 2) + i * k * op * r(1, 2) - i * os * r(4, 3)
            + i * q * os * (r(2, 2) - r(4, 4))
            - eta / 2.0 * r(3, 2),
        -(i * w + big34 / 2.0) * r(4, 3) + i * k * op * r(1, 3) - i * op * r(4, 1) + i * q * os * r(2, 3)
            - i * os * r(4, 2)
            - eta / 2.0 * (r(3, 3) + r(4, 4)),
    ]
}

pub fn upper_components(d: &DensityMatrix64) -> [C; 10] {
    let re = |x: f64| C::new(x, 0.0);
    [re(d.rho11), re(d.rho22), re(d.rho33), re(d.rho44), d.rho12, d.rho13, d.rho14, d.rho23, d.rho24, d.rho34]
}

pub fn max_abs_diff(a: &[C], b: &[C]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
