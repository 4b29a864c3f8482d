use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

use ssh_bell::analytic::{bell_eta_f, bell_residual, scatter_coefficients, taylor_quantities};
use ssh_bell::entangle::{entropy_mixed, project_branch_correlation, reduce_over_first, reduce_over_second};
use ssh_bell::evolve::evolve_orbitals;
use ssh_bell::*;

fn orbital(raw: &[(f64, f64)]) -> SingleParticleWave {
    SingleParticleWave::normalized(raw.iter().map(|&(a, b)| C64::new(a, b)).collect()).unwrap()
}

fn stats() -> impl Strategy<Value = Statistics> {
    prop_oneof![Just(Statistics::Fermion), Just(Statistics::Boson)]
}

/// Couplings away from the gap closings at 0 and ±1.
fn eta() -> impl Strategy<Value = f64> {
    prop_oneof![-0.9..-0.1, 0.1..0.9f64]
}

fn random_pair(cells: usize) -> impl Strategy<Value = (Vec<(f64, f64)>, Vec<(f64, f64)>, Statistics)> {
    let n = 2 * cells;
    (
        prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n),
        prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n),
        stats(),
    )
}

const CELLS: usize = 6;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn band_amplitudes_are_exchange_symmetric_and_parseval((a, b, s) in random_pair(CELLS), w in eta()) {
        let spec = LatticeSpec::periodic(2, CELLS);
        let bands = solve_bands(&spec, &CouplingSnapshot::hopping(w)).unwrap();
        let pair = pair_state(&orbital(&a), &orbital(&b), s, PairForm::Orbitals).unwrap();
        let amps = to_band_amplitudes(&pair, &bands).unwrap();
        prop_assert!(amps.exchange_defect() < 1e-12);
        prop_assert!((amps.norm_sq() - pair.norm_sq()).abs() < 1e-10);
        let dense = to_band_amplitudes(&pair.to_dense(), &bands).unwrap();
        let diff = amps.raw().iter().zip(dense.raw()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        prop_assert!(diff < 1e-12);
    }

    #[test]
    fn projections_are_gauge_independent(
        (a, b, s) in random_pair(CELLS),
        w in eta(),
        phases in prop::collection::vec(0.0..2.0 * PI, 2 * CELLS),
    ) {
        let spec = LatticeSpec::periodic(2, CELLS);
        let mut bands = solve_bands(&spec, &CouplingSnapshot::hopping(w)).unwrap();
        let pair = pair_state(&orbital(&a), &orbital(&b), s, PairForm::Orbitals).unwrap();
        let before = project_band_pair(&to_band_amplitudes(&pair, &bands).unwrap(), 0, 1).unwrap();
        bands.regauge(|k, band| phases[2 * k + band]);
        let after = project_band_pair(&to_band_amplitudes(&pair, &bands).unwrap(), 0, 1).unwrap();
        prop_assert!((before.probability - after.probability).abs() < 1e-10);
        prop_assert!((before.entropy - after.entropy).abs() < 1e-10);
    }

    #[test]
    fn entropy_is_schmidt_symmetric((a, b, s) in random_pair(CELLS), w in eta()) {
        let spec = LatticeSpec::periodic(2, CELLS);
        let bands = solve_bands(&spec, &CouplingSnapshot::hopping(w)).unwrap();
        let pair = pair_state(&orbital(&a), &orbital(&b), s, PairForm::Orbitals).unwrap();
        let p = project_band_pair(&to_band_amplitudes(&pair, &bands).unwrap(), 0, 1).unwrap();
        let v: Vec<C64> = (0..CELLS * CELLS).map(|i| p.amplitudes[(i / CELLS, i % CELLS)]).collect();
        let rho = DMatrix::from_fn(v.len(), v.len(), |i, j| v[i] * v[j].conj() / p.probability);
        let s1 = entropy_mixed(&reduce_over_second(&rho, CELLS)).unwrap();
        let s2 = entropy_mixed(&reduce_over_first(&rho, CELLS)).unwrap();
        prop_assert!((s1 - s2).abs() < 1e-10);
        prop_assert!((s1 - p.entropy).abs() < 1e-9);
    }

    #[test]
    fn plane_waves_conserve_momentum(
        n1 in 0usize..8, gap in 1usize..8, eta_i in eta(), eta_f in eta(), s in stats(),
    ) {
        let spec = LatticeSpec::periodic(2, 8);
        let kgrid = spec.kgrid();
        let (i1, i2) = (n1, (n1 + gap) % 8);
        let bands = solve_bands(&spec, &CouplingSnapshot::hopping(eta_i)).unwrap();
        let a = plane_wave_orbital(&bands, 0, kgrid[i1]).unwrap();
        let b = plane_wave_orbital(&bands, 0, kgrid[i2]).unwrap();
        let pair = pair_state(&a, &b, s, PairForm::Orbitals).unwrap();
        let cfg = EvolutionConfig::new(0.0, 3.0).with_dt(0.01).with_record_times(vec![3.0]);
        let out = evolve_orbitals(&pair, &spec, &DriveProfile::step(eta_i, eta_f, 1.0), None, &cfg).unwrap();
        let post = solve_bands(&spec, &CouplingSnapshot::hopping(eta_f)).unwrap();
        let amps = to_band_amplitudes(&out[0].state, &post).unwrap();
        for al in 0..2 {
            for be in 0..2 {
                for k in 0..8 {
                    for kp in 0..8 {
                        if (k, kp) != (i1, i2) && (k, kp) != (i2, i1) {
                            prop_assert!(amps.get(al, be, k, kp).norm() < 1e-10);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn scatter_sign_rule_and_completeness(
        eta_i in eta(), eta_f in eta(), k1 in 0.05..3.0f64, dk in 0.05..2.5f64, s in stats(),
    ) {
        let spec = LatticeSpec::periodic(2, 16);
        let c = scatter_coefficients(
            &spec, &CouplingSnapshot::hopping(eta_i), &CouplingSnapshot::hopping(eta_f), k1, k1 + dk, 0, s,
        ).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                prop_assert!((c.forward[(a, b)] - c.backward[(b, a)] * s.sign()).norm() < 1e-15);
            }
        }
        prop_assert!((c.total_weight() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn taylor_coefficient_vanishes_on_the_bell_curve(eta_i in eta(), k0 in 0.3..2.8f64) {
        if let Ok(eta_f) = bell_eta_f(eta_i, k0) {
            prop_assume!((eta_f.abs() - 1.0).abs() > 0.05 && eta_f.abs() > 0.05);
            prop_assert!(bell_residual(k0, eta_i, eta_f).abs() < 1e-12);
            prop_assert!(taylor_quantities(k0, eta_i, eta_f).unwrap().z.abs() < 1e-12);
        }
    }

    #[test]
    fn nonzero_residual_gives_nonzero_taylor_coefficient(eta_i in eta(), eta_f in eta(), k0 in 0.3..2.8f64) {
        let r = bell_residual(k0, eta_i, eta_f);
        prop_assume!(r.abs() > 1e-3 && (eta_i - eta_f).abs() > 1e-3);
        prop_assert!(taylor_quantities(k0, eta_i, eta_f).unwrap().z.abs() > 1e-12);
    }

    #[test]
    fn branch_correlation_carries_no_entanglement(
        eta_i in eta(), eta_f in eta(), n1 in 0usize..16, gap in 1usize..16, s in stats(),
    ) {
        let spec = LatticeSpec::periodic(2, 16);
        let kgrid = spec.kgrid();
        let (i1, i2) = (n1, (n1 + gap) % 16);
        let pre = solve_bands(&spec, &CouplingSnapshot::hopping(eta_i)).unwrap();
        let post = solve_bands(&spec, &CouplingSnapshot::hopping(eta_f)).unwrap();
        let a = plane_wave_orbital(&pre, 0, kgrid[i1]).unwrap();
        let b = plane_wave_orbital(&pre, 0, kgrid[i2]).unwrap();
        let pair = pair_state(&a, &b, s, PairForm::Orbitals).unwrap();
        let q = project_branch_correlation(&to_band_amplitudes(&pair, &post).unwrap(), i1, i2).unwrap();
        prop_assert!(q.entropy.abs() < 1e-10);
        prop_assert!((q.probability - 1.0).abs() < 1e-10);
    }

    #[test]
    fn fidelity_ignores_global_phase((a, b, s) in random_pair(CELLS), phase in 0.0..2.0 * PI) {
        let spec = LatticeSpec::periodic(2, CELLS);
        let bands = solve_bands(&spec, &CouplingSnapshot::hopping(0.4)).unwrap();
        let pair = pair_state(&orbital(&a), &orbital(&b), s, PairForm::Orbitals).unwrap();
        let p = project_band_pair(&to_band_amplitudes(&pair, &bands).unwrap(), 0, 1).unwrap();
        let mut q = p.clone();
        q.amplitudes *= C64::from_polar(1.0, phase);
        prop_assert!((fidelity(&p, &q).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trial_statistics_bounds(xs in prop::collection::vec(0.0..1.0f64, 2..50)) {
        let t = trial_statistics(&xs).unwrap();
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(t.mean >= lo - 1e-12 && t.mean <= hi + 1e-12);
        prop_assert!(t.std >= 0.0 && t.std <= 0.5 * (hi - lo) + 1e-12);
    }
}
