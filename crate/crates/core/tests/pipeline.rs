use std::f64::consts::FRAC_PI_4;

use proptest::prelude::*;
use strobo_core::lattice::{plan_cubic_embedding, validate_embedding, PairSet, TorusLattice};
use strobo_core::lindblad::{pump_ancilla, stationary_state, thermal_jump_set, Generator, LindbladModel, PumpProtocol};
use strobo_core::sequence::{echoed_u123, effective_hamiltonian, vertex_generators, VertexPrediction};
use strobo_core::spectra::{build_hamiltonian, fidelity_scan, SolverOptions};

#[test]
fn echoed_coefficients_drive_a_gapped_l2_code() {
    let phi = 0.1;
    let pred = VertexPrediction {
        alpha: phi,
        beta: phi,
        gamma: phi,
        tau: 1.0,
    };
    let h = effective_hamiltonian(&echoed_u123(phi, phi, phi, &vertex_generators(), 1.0).unwrap()).unwrap().h_eff;
    let j_e = h.coefficient(&"ZZZZ".parse().unwrap()).re.abs();
    let chi = h.coefficient(&"IXYI".parse().unwrap()).re;
    assert!((chi / pred.chi() - 1.0).abs() < phi);
    // Relative to J the engineered perturbation is small, so the code
    // survives with near-unit fidelity.
    let lat = TorusLattice::build(2).unwrap();
    let scan = fidelity_scan(&lat, &[chi / j_e], 0.0, PairSet::SequenceDerived, &SolverOptions::default()).unwrap();
    let r = scan.points[0].result.as_ref().unwrap();
    assert!(r.fidelity.subspace > 0.99, "{}", r.fidelity.subspace);
    assert!(r.spread < r.gap);
}

#[test]
fn hamiltonian_is_hermitian_and_translation_invariant_in_energy() {
    let lat = TorusLattice::build(2).unwrap();
    let h = build_hamiltonian(&lat, 1.0, 1.0, 0.3, 0.05, PairSet::SequenceDerived).unwrap();
    let d = h.to_dense().unwrap();
    assert!((&d - d.adjoint()).iter().all(|z| z.norm() < 1e-12));
    let shifted = h.relabeled(&lat.translation(1, 0)).unwrap().to_dense().unwrap();
    let e = |m: &nalgebra::DMatrix<strobo_core::C64>| {
        let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    };
    for (a, b) in e(&d).iter().zip(e(&shifted)) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn model_json_round_trip_preserves_the_fixed_point() {
    let lat = TorusLattice::build(2).unwrap();
    let model = thermal_jump_set(&lat, 0.2, 1.0, 0.5, 4.0).unwrap();
    let back = LindbladModel::from_json(&model.to_json()).unwrap();
    let a = stationary_state(&Generator::for_model(&model).unwrap()).unwrap();
    let b = stationary_state(&Generator::for_model(&back).unwrap()).unwrap();
    let (a, b) = (a.unique_state().unwrap(), b.unique_state().unwrap());
    assert!(a.trace_distance(b) < 1e-12);
}

#[test]
fn pump_at_quarter_pi_is_maximally_mixed() {
    let r = pump_ancilla(&PumpProtocol::standard(FRAC_PI_4, 1.0, 1e5, 4.0)).unwrap();
    assert!((r.populations[0] - 0.5).abs() < 1e-4);
    assert!((r.populations[1] - 0.5).abs() < 1e-4);
    assert!(r.rho[(0, 1)].norm() < 1e-4);
    assert!(r.t_eff.is_infinite());
}

#[test]
fn embeddings_validate_for_small_tori() {
    for l in [2, 3, 4] {
        let lat = TorusLattice::build(l).unwrap();
        let rep = validate_embedding(&plan_cubic_embedding(&lat), &lat);
        assert!(rep.is_valid(), "l = {l}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn thermal_ratios_match_bath_parameter(p in 0.0f64..0.99, lambda in 0.1f64..10.0, gamma in 0.0f64..5.0) {
        let lat = TorusLattice::build(2).unwrap();
        let m = thermal_jump_set(&lat, p, lambda, gamma, 4.0).unwrap();
        let ratios = m.rate_ratios();
        prop_assert!(!ratios.is_empty());
        for (_, r, equal) in ratios {
            prop_assert_eq!(r.to_bits(), (p / (1.0 - p)).to_bits());
            prop_assert!(equal);
        }
    }
}
