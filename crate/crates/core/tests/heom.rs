use heom_core::chain::{chain_map_star, chain_propagate_dense, star_weights};
use heom_core::discretize::discrete_modes;
use heom_core::heom::{Heom, HeomBath, HeomOptions, HierarchyState, Integrator, Scaling, SystemSpec};
use heom_core::linalg::{from_real_rows, hermitian_eigen, hermiticity_defect, max_abs, real_diag, trace};
use heom_core::models::{build_pure_dephasing, pauli_x, superposition, J1_TERMS};
use heom_core::tm::{default_matsubara_count, tm_fit_modes};
use heom_core::{Complex64, DecayMode, Error, Operator, SpectralDensity, UnitSystem};
use proptest::prelude::*;

fn fs(t: f64) -> f64 {
    UnitSystem::default().fs_to_au(t)
}

fn grid(t_end: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| t_end * k as f64 / n as f64).collect()
}

fn op(re: &[&[f64]], im: &[&[f64]]) -> Operator {
    let r = from_real_rows(re);
    let i = from_real_rows(im);
    r + i * Complex64::i()
}

fn j1_tmfit(t_k: f64, depth: usize, scaling: Scaling) -> Heom {
    let model = build_pure_dephasing(0.002, SpectralDensity::tannor_meier(&J1_TERMS).unwrap(), t_k).unwrap();
    let horizon = fs(500.0);
    let m_a = default_matsubara_count(&model.bath.density, model.bath.beta, horizon).unwrap();
    let modes = tm_fit_modes(&model.bath.density, model.bath.beta, m_a, 4, horizon).unwrap();
    let bath = HeomBath::from_spec(&model.bath, modes).unwrap();
    Heom::new(&model.system().unwrap(), &[bath], HeomOptions::new(depth, scaling)).unwrap()
}

fn rk4(h: &Heom) -> Integrator {
    Integrator::Rk4 { dt: h.default_time_step() }
}

#[test]
fn without_modes_is_liouville_von_neumann() {
    let hs = op(
        &[&[0.003, 0.001, 0.0], &[0.001, -0.002, 0.0005], &[0.0, 0.0005, 0.001]],
        &[&[0.0, 0.0004, -0.0002], &[-0.0004, 0.0, 0.0], &[0.0002, 0.0, 0.0]],
    );
    let sys = SystemSpec::new(hs.clone()).unwrap();
    let bath = HeomBath::new(real_diag(&[1.0, 0.0, -1.0]), Vec::new()).unwrap();
    let heom = Heom::new(&sys, &[bath], HeomOptions::new(3, Scaling::Unscaled)).unwrap();
    assert_eq!(heom.hierarchy().len(), 1);
    let rho0 = op(
        &[&[0.5, 0.2, 0.1], &[0.2, 0.3, 0.0], &[0.1, 0.0, 0.2]],
        &[&[0.0, 0.05, 0.0], &[-0.05, 0.0, 0.02], &[0.0, -0.02, 0.0]],
    );
    let times = grid(3000.0, 10);
    let tr = heom
        .propagate(&heom.init_state(&rho0).unwrap(), &times, Integrator::Rk4 { dt: 0.5 }, false)
        .unwrap();
    let (ev, v) = hermitian_eigen(&hs);
    for (t, r) in times.iter().zip(&tr.rho) {
        let phase = Operator::from_diagonal(&nalgebra::DVector::from_iterator(
            3,
            ev.iter().map(|e| (Complex64::i() * (-e * t)).exp()),
        ));
        let u = &v * phase * v.adjoint();
        let exact = &u * &rho0 * u.adjoint();
        let dev = max_abs(&(r - &exact));
        assert!(dev < 1e-10, "t = {t}: {dev}");
    }
}

#[test]
fn zero_hamiltonian_without_coupling_is_stationary() {
    let sys = SystemSpec::new(real_diag(&[0.0, 0.0])).unwrap();
    let modes = discrete_modes(&[(0.01, 1e-3)], 1000.0).unwrap();
    let bath = HeomBath::new(real_diag(&[0.0, 0.0]), modes).unwrap();
    let heom = Heom::new(&sys, &[bath], HeomOptions::new(2, Scaling::Unscaled)).unwrap();
    let rho0 = superposition();
    let tr = heom
        .propagate(&heom.init_state(&rho0).unwrap(), &grid(500.0, 5), Integrator::Rk4 { dt: 1.0 }, false)
        .unwrap();
    for r in &tr.rho {
        assert_eq!(r, &rho0);
    }
}

#[test]
fn pure_dephasing_freezes_populations_and_keeps_trace() {
    let heom = j1_tmfit(298.0, 3, Scaling::Unscaled);
    let tr = heom
        .propagate(&heom.init_state(&superposition()).unwrap(), &grid(fs(100.0), 20), rk4(&heom), false)
        .unwrap();
    for r in &tr.rho {
        assert!((r[(0, 0)].re - 0.5).abs() < 1e-10);
        assert!((r[(1, 1)].re - 0.5).abs() < 1e-10);
        assert!((trace(r) - 1.0).norm() < 1e-8);
        assert!(hermiticity_defect(r) < 1e-12);
    }
    // Coherence actually decays.
    assert!(tr.rho.last().unwrap()[(0, 1)].norm() < 0.45);
}

#[test]
fn scaled_and_unscaled_hierarchies_agree() {
    let times = grid(fs(100.0), 10);
    let a = j1_tmfit(298.0, 3, Scaling::Unscaled);
    let b = j1_tmfit(298.0, 3, Scaling::SqrtScaled);
    let ta = a.propagate(&a.init_state(&superposition()).unwrap(), &times, rk4(&a), false).unwrap();
    let tb = b.propagate(&b.init_state(&superposition()).unwrap(), &times, rk4(&b), false).unwrap();
    for (x, y) in ta.rho.iter().zip(&tb.rho) {
        assert!(max_abs(&(x - y)) < 1e-10);
    }
}

#[test]
fn deeper_hierarchies_converge() {
    let times = grid(fs(300.0), 30);
    let coh: Vec<Vec<f64>> = (2..=4)
        .map(|l| {
            let h = j1_tmfit(298.0, l, Scaling::Unscaled);
            let tr = h.propagate(&h.init_state(&superposition()).unwrap(), &times, rk4(&h), false).unwrap();
            tr.rho.iter().map(|r| r[(0, 1)].norm()).collect()
        })
        .collect();
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let d23 = diff(&coh[0], &coh[1]);
    let d34 = diff(&coh[1], &coh[2]);
    assert!(d34 < d23, "{d23} {d34}");
}

#[test]
fn rk45_matches_rk4() {
    let h = j1_tmfit(298.0, 3, Scaling::Unscaled);
    let times = grid(fs(100.0), 10);
    let s = h.init_state(&superposition()).unwrap();
    let a = h.propagate(&s, &times, rk4(&h), false).unwrap();
    let b = h.propagate(&s, &times, Integrator::Rk45 { rtol: 1e-10, atol: 1e-12 }, true).unwrap();
    for (x, y) in a.rho.iter().zip(&b.rho) {
        assert!(max_abs(&(x - y)) < 1e-8);
    }
    let norms = b.layer_norms.unwrap();
    assert_eq!(norms[0].len(), 4);
    assert!(norms.iter().all(|n| n[1] < n[0]));
}

#[test]
fn single_undamped_mode_matches_dense_chain() {
    let w: f64 = 0.0108;
    let coupling = 0.005 * w.sqrt();
    let hs = real_diag(&[0.0, 0.005]);
    let sys = SystemSpec::new(hs).unwrap();
    let s = pauli_x();
    let rho0 = real_diag(&[0.0, 1.0]);
    let times = grid(fs(100.0), 50);

    let modes = discrete_modes(&[(w, coupling)], f64::INFINITY).unwrap();
    let bath = HeomBath::new(s.clone(), modes).unwrap();
    let heom = Heom::new(&sys, &[bath], HeomOptions::new(16, Scaling::SqrtScaled)).unwrap();
    let tr = heom
        .propagate(&heom.init_state(&rho0).unwrap(), &times, rk4(&heom), false)
        .unwrap();

    let (f, g2) = star_weights(&[(w, coupling)]).unwrap();
    let (chain, _) = chain_map_star(&f, &g2, 1, f64::INFINITY).unwrap();
    let reference = chain_propagate_dense(&sys, &s, &chain, 30, &rho0, &times, 100_000).unwrap();
    let mut dev = 0.0f64;
    for (a, b) in tr.rho.iter().zip(&reference.rho) {
        dev = dev.max(max_abs(&(a - b)));
    }
    assert!(dev < 1e-5, "{dev}");
    // The coupling is strong enough to move population.
    let moved = tr.rho.iter().map(|r| r[(0, 0)].re).fold(0.0, f64::max);
    assert!(moved > 1e-3, "{moved}");
}

#[test]
fn init_state_rejects_bad_density_matrices() {
    let h = j1_tmfit(298.0, 1, Scaling::Unscaled);
    let s = h.init_state(&superposition()).unwrap();
    assert_eq!(s.root(), superposition());
    assert!(s.ados[4..].iter().all(|z| z.norm() == 0.0));
    assert!(matches!(h.init_state(&real_diag(&[0.5, 0.4])), Err(Error::BadTrace(_))));
    assert!(h.init_state(&real_diag(&[1.5, -0.5])).is_err());
    assert!(h.init_state(&real_diag(&[0.5, 0.25, 0.25])).is_err());
    let not_hermitian = op(&[&[0.5, 0.1], &[0.0, 0.5]], &[&[0.0, 0.0], &[0.0, 0.0]]);
    assert!(h.init_state(&not_hermitian).is_err());
}

#[test]
fn mixed_mode_families_are_rejected() {
    let sys = SystemSpec::new(real_diag(&[0.0, 0.001])).unwrap();
    let mut modes = discrete_modes(&[(0.01, 1e-3)], 1000.0).unwrap();
    modes.push(DecayMode::new(
        Complex64::new(1e-6, 0.0),
        Complex64::new(0.0, 0.01),
        Complex64::new(1e-6, 0.0),
        heom_core::ModeFamily::FittedExp,
    ));
    let bath = HeomBath::new(real_diag(&[1.0, -1.0]), modes).unwrap();
    assert!(Heom::new(&sys, &[bath], HeomOptions::new(2, Scaling::Unscaled)).is_err());
}

#[test]
fn memory_budget_is_enforced() {
    let model = build_pure_dephasing(0.002, SpectralDensity::tannor_meier(&J1_TERMS).unwrap(), 298.0).unwrap();
    let modes = discrete_modes(&[(0.01, 1e-3); 20], model.bath.beta).unwrap();
    let bath = HeomBath::from_spec(&model.bath, modes).unwrap();
    let mut opts = HeomOptions::new(6, Scaling::Unscaled);
    opts.memory_budget = 1_000_000;
    assert!(matches!(
        Heom::new(&model.system().unwrap(), &[bath], opts),
        Err(Error::MemoryBudget { .. })
    ));
}

fn two_mode_heom() -> Heom {
    let sys = SystemSpec::new(op(&[&[0.0, 0.001], &[0.001, 0.004]], &[&[0.0, 0.0], &[0.0, 0.0]])).unwrap();
    let tm = j1_tmfit(298.0, 1, Scaling::Unscaled);
    let b1 = HeomBath::new(real_diag(&[1.0, 0.3]), tm.modes().to_vec()).unwrap();
    let b2 = HeomBath::new(pauli_x(), discrete_modes(&[(0.006, 2e-4)], 1500.0).unwrap()).unwrap();
    Heom::new(&sys, &[b1, b2], HeomOptions::new(2, Scaling::Unscaled)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn root_trace_is_conserved_by_the_generator(
        seed in prop::collection::vec(-1.0f64..1.0, 2 * 4 * 45)
    ) {
        let h = two_mode_heom();
        let len = h.elements();
        let ados: Vec<Complex64> = (0..len).map(|i| Complex64::new(seed[2 * i], seed[2 * i + 1])).collect();
        let state = HierarchyState { ados, n: 2, scaling: h.scaling() };
        let d = h.rhs(&state).unwrap();
        let dtr = d.ados[0] + d.ados[3];
        let scale = state.ados.iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(dtr.norm() < 1e-14 * scale.max(1.0), "{}", dtr.norm());
    }
}

#[test]
fn hierarchy_preserves_hermiticity() {
    let h = two_mode_heom();
    let rho0 = op(&[&[0.7, 0.2], &[0.2, 0.3]], &[&[0.0, 0.1], &[-0.1, 0.0]]);
    let tr = h.propagate(&h.init_state(&rho0).unwrap(), &grid(fs(50.0), 10), rk4(&h), false).unwrap();
    for r in &tr.rho {
        assert!(hermiticity_defect(r) < 1e-12, "{}", hermiticity_defect(r));
        assert!((trace(r) - 1.0).norm() < 1e-10);
    }
}

#[test]
fn observer_can_stop_a_run() {
    let h = j1_tmfit(298.0, 2, Scaling::Unscaled);
    let times = grid(fs(50.0), 10);
    let mut seen = 0;
    let tr = h
        .propagate_observed(&h.init_state(&superposition()).unwrap(), &times, rk4(&h), false, |_, _| {
            seen += 1;
            if seen == 4 {
                std::ops::ControlFlow::Break(())
            } else {
                std::ops::ControlFlow::Continue(())
            }
        })
        .unwrap();
    assert_eq!(tr.times.len(), 4);
    assert_eq!(tr.times[3], times[3]);
}
