mod common;

use num_complex::Complex64;

use common::*;
use rodeo_fusion::fusion::{fusion_subproblem, Filling};
use rodeo_fusion::propagate::{
    adiabatic_ramp, converged_ramp, expmv, expmv_dense, expmv_krylov, FusedSystem, RampOptions,
};
use rodeo_fusion::rodeo::{ancilla_circuit_cycle, make_schedule, rodeo_cycle, run_rodeo};
use rodeo_fusion::spectral::{
    dense_spectrum, eigen_residual, infidelity, lowest_two, lowest_two_with,
    sector_ground_energy_oracle, spectral_weight, EigenMethod,
};
use rodeo_fusion::spin_model::{
    binomial, build_hamiltonian, embed_product, middle_bond, BondCouplings, StateVector,
};
use rodeo_fusion::Error;

#[test]
fn sparse_matches_brute_force_with_random_bonds() {
    let mut r = rng(11);
    for (sites, n_up) in [(2, 1), (3, 1), (4, 2), (5, 2), (6, 3), (7, 4)] {
        let basis = sector(sites, n_up);
        let couplings = random_couplings(sites, &mut r);
        let h = build_hamiltonian(basis.clone(), &couplings).unwrap();
        let expected = brute_force_dense(&basis, couplings.values());
        assert!((h.to_dense() - expected).abs().max() < 1e-15);
    }
}

#[test]
fn sector_dimensions_are_binomials() {
    for sites in 1..=12 {
        for n_up in 0..=sites {
            assert_eq!(sector(sites, n_up).dim() as u128, binomial(sites, n_up));
        }
    }
}

#[test]
fn ground_energy_against_free_fermions() {
    for sites in 2..=12 {
        for n_up in 1..sites {
            let h = uniform_chain(sites, n_up, 1.0);
            let e0 = lowest_two(&h).map(|p| p.e0).or_else(|e| match e {
                Error::DegenerateGap { .. } => Ok(dense_spectrum(&h).min()),
                other => Err(other),
            });
            let oracle = sector_ground_energy_oracle(sites, n_up, 1.0);
            assert!((e0.unwrap() - oracle).abs() < 1e-9, "L={sites} n_up={n_up}");
        }
    }
}

#[test]
fn coupling_scales_spectrum() {
    let a = lowest_two(&uniform_chain(8, 4, 1.0)).unwrap();
    let b = lowest_two(&uniform_chain(8, 4, 2.5)).unwrap();
    assert!((b.e0 - 2.5 * a.e0).abs() < 1e-12);
    assert!((b.gap() - 2.5 * a.gap()).abs() < 1e-12);
}

#[test]
fn golden_eight_site_half_filling() {
    let pair = lowest_two(&uniform_chain(8, 4, 1.0)).unwrap();
    assert!((pair.e0 - -4.758770483143634).abs() < 1e-10);
    assert!((pair.e1 - -4.064177772475912).abs() < 1e-10);
}

#[test]
fn lanczos_agrees_with_dense_above_crossover() {
    let h = uniform_chain(12, 5, 1.0);
    assert!(h.dim() >= 400);
    let dense = lowest_two_with(&h, EigenMethod::Dense).unwrap();
    let lanczos = lowest_two_with(&h, EigenMethod::Lanczos).unwrap();
    assert!((dense.e0 - lanczos.e0).abs() < 1e-9);
    assert!((dense.e1 - lanczos.e1).abs() < 1e-9);
    assert!(infidelity(&dense.ground, &lanczos.ground).unwrap() < 1e-12);
    assert!(eigen_residual(&h, &lanczos.ground, lanczos.e0) < 1e-8);
}

#[test]
fn two_singlets_against_four_site_ground_state() {
    let sys = fusion_subproblem(4, Filling::HALF, 1.0).unwrap();
    let fidelity = spectral_weight(&sys.product, &sys.spectrum.ground).unwrap();
    assert!((fidelity.powi(2) - 0.8972135954999564).abs() < 1e-12);
    assert!((sys.product_infidelity().unwrap() - 0.10278640450004362).abs() < 1e-12);
}

#[test]
fn embedding_preserves_norm_and_is_separable() {
    let mut r = rng(5);
    let left = random_state(sector(3, 1), &mut r);
    let right = random_state(sector(3, 2), &mut r);
    let fused = embed_product(&left, &right).unwrap();
    assert_eq!(fused.basis().sites(), 6);
    assert_eq!(fused.basis().n_up(), 3);
    assert!((fused.norm() - 1.0).abs() < 1e-14);
    for (i, &c) in fused.basis().configs().iter().enumerate() {
        let l = left.basis().index_of(c & 0b111);
        let rr = right.basis().index_of(c >> 3);
        let expected = match (l, rr) {
            (Some(a), Some(b)) => left.amps()[a] * right.amps()[b],
            _ => Complex64::new(0.0, 0.0),
        };
        assert!((fused.amps()[i] - expected).norm() < 1e-15);
    }
}

#[test]
fn expmv_paths_against_taylor_oracle() {
    let mut r = rng(21);
    for (sites, n_up, t) in [(4, 2, 0.7), (6, 3, 5.0), (7, 3, -3.2), (8, 4, 12.0)] {
        let basis = sector(sites, n_up);
        let couplings = random_couplings(sites, &mut r);
        let h = build_hamiltonian(basis.clone(), &couplings).unwrap();
        let v = random_state(basis.clone(), &mut r);
        let oracle = apply_dense(&dense_propagator(&h.to_dense(), t), &v);
        for got in [
            expmv(&h, t, &v, 1e-12).unwrap(),
            expmv_dense(&h, t, &v).unwrap(),
            expmv_krylov(&h, t, &v, 1e-12).unwrap(),
        ] {
            assert!(l2_diff(got.amps(), &oracle) < 1e-10, "L={sites} t={t}");
        }
    }
}

#[test]
fn krylov_path_on_large_sector_is_unitary_and_reversible() {
    let mut r = rng(8);
    let h = uniform_chain(12, 6, 1.0);
    let v = random_state(h.basis().clone(), &mut r);
    let forward = expmv(&h, 7.5, &v, 1e-12).unwrap();
    assert!((forward.norm() - 1.0).abs() < 1e-10);
    let back = expmv(&h, -7.5, &forward, 1e-12).unwrap();
    assert!(l2_diff(back.amps(), v.amps()) < 1e-10);
}

#[test]
fn eigenstate_only_acquires_phase() {
    let h = uniform_chain(10, 5, 1.0);
    let pair = lowest_two(&h).unwrap();
    let t = 3.3;
    let evolved = expmv_krylov(&h, t, &pair.ground, 1e-12).unwrap();
    let expected = pair.ground.scaled(Complex64::from_polar(1.0, -pair.e0 * t));
    assert!(l2_diff(evolved.amps(), expected.amps()) < 1e-10);
}

#[test]
fn zero_time_ramp_keeps_product_state() {
    let sys = fusion_subproblem(8, Filling::HALF, 1.0).unwrap();
    let schedule = sys.schedule(0.0, 4);
    let out = adiabatic_ramp(&sys.product, &sys.split, &schedule, 1e-12).unwrap();
    assert!(l2_diff(out.amps(), sys.product.amps()) < 1e-12);
}

#[test]
fn ramp_with_one_step_is_plain_evolution() {
    // A single midpoint step evolves under H_split + ½J·H_bond.
    let sys = fusion_subproblem(8, Filling::HALF, 1.0).unwrap();
    let t = 2.0;
    let out = adiabatic_ramp(&sys.product, &sys.split, &sys.schedule(t, 1), 1e-12).unwrap();
    let bond = middle_bond(8).unwrap();
    let midpoint = sys.split.clone().with_bond(bond, 0.5);
    let h = build_hamiltonian(sys.basis.clone(), &midpoint).unwrap();
    let oracle = apply_dense(&dense_propagator(&h.to_dense(), t), &sys.product);
    assert!(l2_diff(out.amps(), &oracle) < 1e-10);
}

#[test]
fn converged_ramp_agrees_with_reference_integration() {
    // Reference values from an independent high-order ODE integration of
    // the continuous linear ramp at L = 8, half filling, J = 1.
    let sys = fusion_subproblem(8, Filling::HALF, 1.0).unwrap();
    assert!((sys.product_infidelity().unwrap() - 0.158480554).abs() < 1e-8);
    assert!((sys.spectrum.gap() - 0.69459271).abs() < 1e-7);
    for (t, reference) in [(4.0, 9.1654e-3), (16.0, 6.7673e-4)] {
        let ramp = converged_ramp(&sys, t, &RampOptions::default()).unwrap();
        assert!(
            (ramp.infidelity - reference).abs() < 0.02 * reference,
            "T={t}: {} vs {reference}",
            ramp.infidelity
        );
    }
}

#[test]
fn long_ramp_beats_product_state() {
    let sys = fusion_subproblem(8, Filling::QUARTER, 1.0).unwrap();
    let ramp = converged_ramp(&sys, 32.0, &RampOptions::default()).unwrap();
    assert!(ramp.infidelity < 0.1 * sys.product_infidelity().unwrap());
}

#[test]
fn rodeo_cycle_matches_circuit_on_small_sector() {
    let mut r = rng(3);
    let h = uniform_chain(5, 2, 1.0);
    let v = random_state(h.basis().clone(), &mut r);
    let (a, pa) = rodeo_cycle(&v, &h, -1.1, 2.7).unwrap();
    let (b, pb) = ancilla_circuit_cycle(&v, &h, -1.1, 2.7).unwrap();
    assert!((pa - pb).abs() < 1e-10);
    assert!(max_diff(a.amps(), b.amps()) < 1e-10);
}

#[test]
fn rodeo_probability_matches_spectral_formula() {
    // P = Σ_k |c_k|² cos²((E_k − E_t) t / 2) for a single cycle.
    let mut r = rng(4);
    let h = uniform_chain(6, 3, 1.0);
    let v = random_state(h.basis().clone(), &mut r);
    let eig = nalgebra::SymmetricEigen::new(h.to_dense());
    let (et, t) = (-0.4, 1.9);
    let mut expected = 0.0;
    for k in 0..h.dim() {
        let col = eig.eigenvectors.column(k);
        let c: Complex64 = col.iter().zip(v.amps()).map(|(&x, a)| a * x).sum();
        expected += c.norm_sqr() * ((eig.eigenvalues[k] - et) * t / 2.0).cos().powi(2);
    }
    let (_, p) = rodeo_cycle(&v, &h, et, t).unwrap();
    assert!((p - expected).abs() < 1e-12);
}

#[test]
fn rodeo_leaves_ground_state_alone() {
    let sys = fusion_subproblem(8, Filling::HALF, 1.0).unwrap();
    let schedule = make_schedule(sys.spectrum.gap(), 8, 2).unwrap();
    let out = run_rodeo(
        &sys.spectrum.ground,
        &sys.hamiltonian,
        sys.spectrum.e0,
        &schedule,
    )
    .unwrap();
    assert!((out.p_total - 1.0).abs() < 1e-12);
    assert!(infidelity(&out.state, &sys.spectrum.ground).unwrap() < 1e-20);
}

#[test]
fn fused_system_rejects_odd_halves_and_mismatched_products() {
    let odd = StateVector::basis_state(sector(3, 1), 0b001).unwrap();
    let sys = FusedSystem::from_half(&odd, 1.0).unwrap();
    assert_eq!(sys.sites(), 6);
    let weird = StateVector::basis_state(sector(5, 2), 0b00011).unwrap();
    assert!(FusedSystem::from_product(weird, 1.0).is_err());
    assert!(BondCouplings::split(5, 1.0).is_err());
}
