//! Physical behaviour of the collision schedule: Markovian decay, bin
//! alignment, free propagation, the input-symmetry convention and the
//! stationarity of the discretized bound state.

use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use num_complex::Complex64 as C64;

use waveguide_bic::analytics::{discretized_bic_state, p_bic_analytic};
use waveguide_bic::collision::{Couplings, SiteMap, StepGate};
use waveguide_bic::mps::{photon, MpsState};
use waveguide_bic::oracle::{evolve_exact, ExactState};
use waveguide_bic::wavepacket::{initial_state, initial_state_with, RelaxationStart};
use waveguide_bic::{CollisionEngine, Detuning, Mode, ModelParams, SiteRole};

fn decoupled(p: &ModelParams, c: Couplings) -> CollisionEngine {
    CollisionEngine::with_gates(p, StepGate::build_with(p, false, c).unwrap(), None).unwrap()
}

#[test]
fn lone_qubit_decays_exponentially() {
    let p = ModelParams { mode: Mode::Relaxation, ell: 20, n_bins: 220, steps: 200, ..Default::default() };
    let engine = decoupled(&p, Couplings { qubit1: 1.0, qubit2: 0.0 });
    let out = engine.run(initial_state_with(&p, RelaxationStart::Qubit1).unwrap()).unwrap();
    // each step rotates the excitation out with angle sqrt(γΔt)
    let per_step = (p.gamma * p.dt).sqrt().cos().powi(2);
    for r in &out.records {
        assert_abs_diff_eq!(r.p_e1, per_step.powi(r.step as i32), epsilon = 1e-10);
        assert_abs_diff_eq!(r.p_e1, (-p.gamma * r.time).exp(), epsilon = 5e-3);
        assert!(r.p_e2 < 1e-20);
    }
}

fn one_photon_in_bin(p: &ModelParams, m0: i64, mode: usize) -> MpsState {
    let roles = SiteMap::new(p).roles();
    let amps: Vec<Vec<(usize, C64)>> = roles
        .iter()
        .map(|r| if *r == SiteRole::Bin(m0) { vec![(mode, C64::new(1.0, 0.0))] } else { vec![] })
        .collect();
    MpsState::single_excitation(&amps, &roles).unwrap()
}

#[test]
fn photon_reaches_each_qubit_at_its_bin() {
    let p = ModelParams { mode: Mode::ScatterSym, ell: 4, n_bins: 30, steps: 20, dt: 0.1, ..Default::default() };
    let m0 = 6;
    // right-moving photon: qubit 1 at step m0, qubit 2 at step m0 + ell
    let first = decoupled(&p, Couplings { qubit1: 1.0, qubit2: 0.0 });
    let mut p1 = Vec::new();
    first
        .run_observed(one_photon_in_bin(&p, m0, photon::R), |k, s| {
            p1.push((k, s.local_occupations().p_e1));
            Ok(())
        })
        .unwrap();
    for (k, e) in &p1 {
        if *k <= m0 {
            assert!(*e < 1e-24, "qubit 1 excited early at {k}");
        }
    }
    assert!(p1.iter().find(|(k, _)| *k == m0 + 1).unwrap().1 > 0.02);

    let second = decoupled(&p, Couplings { qubit1: 0.0, qubit2: 1.0 });
    let mut p2 = Vec::new();
    second
        .run_observed(one_photon_in_bin(&p, m0, photon::R), |k, s| {
            p2.push((k, s.local_occupations().p_e2));
            Ok(())
        })
        .unwrap();
    let delayed = m0 + p.ell as i64;
    for (k, e) in &p2 {
        if *k <= delayed {
            assert!(*e < 1e-24, "qubit 2 excited early at {k}");
        }
    }
    assert!(p2.iter().find(|(k, _)| *k == delayed + 1).unwrap().1 > 0.02);

    // relabeled left-moving photon in bin m0 meets qubit 2 at step m0 and
    // qubit 1 at step m0 + ell
    let mut p2l = Vec::new();
    second
        .run_observed(one_photon_in_bin(&p, m0, photon::L), |k, s| {
            p2l.push((k, s.local_occupations().p_e2));
            Ok(())
        })
        .unwrap();
    assert!(p2l.iter().filter(|(k, _)| *k <= m0).all(|(_, e)| *e < 1e-24));
    assert!(p2l.iter().find(|(k, _)| *k == m0 + 1).unwrap().1 > 0.02);
}

#[test]
fn zero_coupling_leaves_the_field_untouched() {
    let p = ModelParams { gamma: 0.0, ell: 10, n_bins: 120, steps: 100, gamma_band: 1.0, ..Default::default() };
    let engine = CollisionEngine::new(&p).unwrap();
    let init = initial_state(&p).unwrap();
    let before = init.local_occupations();
    let out = engine.run(init).unwrap();
    let after = out.final_state.local_occupations();
    let sorted = |mut v: Vec<(i64, f64, f64)>| {
        v.sort_by_key(|x| x.0);
        v
    };
    for (a, b) in sorted(before.bins).iter().zip(sorted(after.bins)) {
        assert_eq!(a.0, b.0);
        assert_abs_diff_eq!(a.1, b.1, epsilon = 1e-13);
        assert_abs_diff_eq!(a.2, b.2, epsilon = 1e-13);
    }
    for r in &out.records {
        assert!(r.p_bic_inferred.abs() < 1e-20 && r.p_e1 < 1e-20 && r.p_e2 < 1e-20);
    }
}

// The symmetric input (equal weights on both sides in the lab frame) feeds
// the bound state at odd multiples of π; the antisymmetric one at even
// multiples. Frozen against the closed form and a pinned value.
#[test]
fn input_symmetry_convention() {
    let flagship = ModelParams::default();
    let run = |mode, phi| {
        let p = ModelParams { mode, phi, ..flagship.clone() };
        evolve_exact(&p, ExactState::scattering(&p).unwrap()).unwrap().last().p_bic_inferred
    };
    let sym_pi = run(Mode::ScatterSym, PI);
    assert_abs_diff_eq!(sym_pi, 0.541748, epsilon = 2e-6);
    assert_abs_diff_eq!(sym_pi, p_bic_analytic(0.625, 1.0, 4.0).unwrap(), epsilon = 0.011);
    assert!(run(Mode::ScatterAntisym, PI) < 1e-12);
    assert_abs_diff_eq!(run(Mode::ScatterAntisym, 2.0 * PI), sym_pi, epsilon = 1e-9);
    assert!(run(Mode::ScatterSym, 2.0 * PI) < 1e-12);
    assert_abs_diff_eq!(run(Mode::ScatterSym, 3.0 * PI), sym_pi, epsilon = 1e-9);
    assert_abs_diff_eq!(run(Mode::ScatterOnesideR, PI), sym_pi / 2.0, epsilon = 1e-9);
    assert_abs_diff_eq!(run(Mode::ScatterOnesideL, 2.0 * PI), sym_pi / 2.0, epsilon = 1e-9);
}

#[test]
fn discretized_bound_state_is_nearly_stationary() {
    let p = ModelParams { mode: Mode::ScatterSym, ell: 50, n_bins: 450, steps: 400, ..Default::default() };
    let bic0 = discretized_bic_state(&p, 0).unwrap();
    assert_abs_diff_eq!(bic0.norm_sqr(), 1.0, epsilon = 1e-12);
    let engine = CollisionEngine::new(&p).unwrap();
    let out = engine.run(bic0).unwrap();
    let k = out.last().step;
    let bic_k = discretized_bic_state(&p, k).unwrap();
    let overlap = bic_k.inner_product(&out.final_state).unwrap().norm_sqr();
    assert!(overlap > 0.98, "overlap {overlap}");
    // the Bell population keeps the bound-state value 1/(1 + γτ/2)
    assert_abs_diff_eq!(out.last().bell_bic(&p), 0.5, epsilon = 0.02);
    assert_abs_diff_eq!(out.last().p_bic_inferred, 1.0, epsilon = 0.04);
}

#[test]
fn zero_detuning_equals_always_coupled_evolution() {
    let p = ModelParams { ell: 10, n_bins: 120, steps: 100, gamma_band: 5.0, delta_omega: Detuning::Finite(0.0), ..Default::default() };
    let plain = StepGate::build(&p, false).unwrap();
    let detuned = StepGate::build(&p, true).unwrap();
    assert_eq!(plain.matrix, detuned.matrix);
    let a = CollisionEngine::new(&p).unwrap().run(initial_state(&p).unwrap()).unwrap();
    let b = CollisionEngine::with_gates(&p, plain.clone(), Some(plain)).unwrap().run(initial_state(&p).unwrap()).unwrap();
    assert_eq!(a.records, b.records);
    // without a switch the incoming photon cannot populate an eigenstate
    assert!(a.last().p_bic_inferred < 1e-12);
}

#[test]
fn large_detuning_approaches_the_ideal_switch() {
    let base = ModelParams { ell: 25, n_bins: 800, steps: 700, gamma_band: 2.513, mode: Mode::ScatterSym, phi: 25.0 * PI, ..Default::default() };
    let ideal = evolve_exact(&base, ExactState::scattering(&base).unwrap()).unwrap().last().bell_bic(&base);
    let far = ModelParams { delta_omega: Detuning::Finite(1000.0), ..base.clone() };
    let v = evolve_exact(&far, ExactState::scattering(&far).unwrap()).unwrap().last().bell_bic(&far);
    assert!((v - ideal).abs() / ideal < 0.02);
}
