mod common;

use std::f64::consts::FRAC_PI_2;

use common::{density_from_raw, max_abs_diff, upper_components};
use nalgebra::{Matrix4, SymmetricEigen, Vector4};
use proptest::prelude::*;
use qwsim::analysis::{
    apply_hamiltonian, berry_phase, coherent_hamiltonian, commutator_term, dark_state_phi0, dark_state_phi1,
    lossless_rhs, lower_subspace_min_coupling, mixing_phi, mixing_theta,
};
use qwsim::{rabi_envelope, Detuning64, PulseParams64, QuadratureConfig, SystemParams64};

/// Trapezoid rule on a uniform grid with θ̇ from the quotient rule on the
/// raw envelopes.
fn trapezoid_berry(pulses: &PulseParams64, omega43: f64, lo: f64, hi: f64, n: usize) -> f64 {
    let f = |t: f64| {
        let gp = (-((t - pulses.t_p) / pulses.tau).powi(2)).exp();
        let gs = (-((t - pulses.t_s) / pulses.tau).powi(2)).exp();
        let (op, os) = (pulses.omega_p0 * gp, pulses.omega_s0 * gs);
        let dop = -2.0 * (t - pulses.t_p) / pulses.tau.powi(2) * op;
        let dos = -2.0 * (t - pulses.t_s) / pulses.tau.powi(2) * os;
        let theta_dot = (dop * os - op * dos) / (op * op + os * os);
        let tan_phi = (omega43 / 2.0) / (2.0 * (op * op + os * os)).sqrt();
        theta_dot * tan_phi / (1.0 + tan_phi * tan_phi).sqrt()
    };
    let h = (hi - lo) / n as f64;
    let mut sum = 0.5 * (f(lo) + f(hi));
    for j in 1..n {
        sum += f(lo + h * j as f64);
    }
    sum * h
}

#[test]
fn berry_phase_matches_trapezoid_oracle() {
    let pulses = PulseParams64::reference();
    for omega43 in [0.5, 2.0, 8.0, 11.76, 25.38] {
        let coarse = trapezoid_berry(&pulses, omega43, -40.0, 140.0, 20_000);
        let fine = trapezoid_berry(&pulses, omega43, -40.0, 140.0, 40_000);
        assert!((coarse - fine).abs() < 1e-12, "oracle not converged");
        let ours = berry_phase(&pulses, omega43, &QuadratureConfig::default()).unwrap();
        assert!((ours - fine).abs() < 1e-8, "omega43 = {omega43}: {ours} vs {fine}");
    }
}

#[test]
fn berry_phase_is_monotone_in_splitting() {
    let pulses = PulseParams64::reference();
    let quad = QuadratureConfig::default();
    let values: Vec<f64> = (0..=60).map(|n| berry_phase(&pulses, n as f64 * 0.5, &quad).unwrap()).collect();
    assert_eq!(values[0], 0.0);
    assert!(values.windows(2).all(|w| w[1] > w[0]));
    assert!(*values.last().unwrap() < FRAC_PI_2);
}

#[test]
fn midpoint_null_space_holds_both_dark_states() {
    let (op, os, w) = (1.7, 2.9, 6.3);
    let p = SystemParams64::lossless(1.0, 1.0, w);
    let h = coherent_hamiltonian(&p, op, os, &Detuning64::midpoint(w));
    let m = Matrix4::from_fn(|i, j| h[i][j]);
    let eig = SymmetricEigen::new(m);
    let null: Vec<Vector4<f64>> =
        (0..4).filter(|&n| eig.eigenvalues[n].abs() < 1e-9).map(|n| eig.eigenvectors.column(n).into_owned()).collect();
    assert_eq!(null.len(), 2, "eigenvalues {:?}", eig.eigenvalues);

    let theta = mixing_theta(op, os).unwrap();
    let phi = mixing_phi(op, os, w).unwrap();
    for v in [dark_state_phi0(theta), dark_state_phi1(theta, phi)] {
        let v = Vector4::from_fn(|i, _| v.0[i].re);
        let captured: f64 = null.iter().map(|u| u.dot(&v).powi(2)).sum();
        assert!((captured - 1.0).abs() < 1e-10, "{captured}");
    }
}

#[test]
fn reference_structure_has_no_dark_lower_superposition() {
    let p = SystemParams64::reference();
    let pulses = PulseParams64::reference();
    for t in [30.0, 35.0, 40.0, 45.0, 50.0] {
        let (op, os) = rabi_envelope(t, &pulses);
        let h = coherent_hamiltonian(&p, op, os, &Detuning64::midpoint(p.omega43));
        assert!(lower_subspace_min_coupling(&h) > 0.1 * op.min(os), "t = {t}");
    }
}

proptest! {
    #[test]
    fn commutator_reproduces_coherent_terms(raw in prop::collection::vec(-1.0f64..1.0, 32),
                                            k in -1.5f64..1.5, q in -1.5f64..1.5, w in 0.0f64..30.0,
                                            op in 0.0f64..5.0, os in 0.0f64..5.0,
                                            dp in -20.0f64..20.0, ds in -20.0f64..20.0) {
        prop_assume!(raw.iter().any(|x| x.abs() > 1e-3));
        let rho = density_from_raw(&raw);
        let p = SystemParams64::lossless(k, q, w);
        let det = Detuning64::new(dp, ds);
        let h = coherent_hamiltonian(&p, op, os, &det);
        let a = upper_components(&commutator_term(&h, &rho));
        let b = upper_components(&lossless_rhs(&p, op, os, &det, &rho));
        prop_assert!(max_abs_diff(&a, &b) < 1e-12);
    }

    #[test]
    fn dark_states_are_null_at_midpoint(op in 0.01f64..10.0, os in 0.01f64..10.0, w in 0.0f64..40.0) {
        let p = SystemParams64::lossless(1.0, 1.0, w);
        let h = coherent_hamiltonian(&p, op, os, &Detuning64::midpoint(w));
        let theta = mixing_theta(op, os).unwrap();
        let phi = mixing_phi(op, os, w).unwrap();
        prop_assert!(apply_hamiltonian(&h, &dark_state_phi0(theta)).norm() < 1e-10);
        prop_assert!(apply_hamiltonian(&h, &dark_state_phi1(theta, phi)).norm() < 1e-10);
    }
}
