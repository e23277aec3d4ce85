mod common;

use common::*;
use lindblad_core::linalg::{hermitian_eigenvalues, ComplexMatrix};
use lindblad_core::model::*;
use lindblad_core::propagate::*;
use proptest::prelude::*;

const BACKENDS: [ChannelBackend; 2] = [ChannelBackend::SuperopExp, ChannelBackend::LocalApply];

/// Field along Z plus Z dephasing on every site: all summands commute.
fn commuting_model(n: usize, h: f64, gamma: f64) -> LindbladModel {
    let field = HamiltonianTerm {
        label: "Z".into(),
        pieces: (0..n)
            .map(|s| LocalOperator::new(vec![s], pauli_z().scale_real(h)).unwrap())
            .collect(),
    };
    let jumps = (0..n)
        .map(|s| JumpOperator {
            label: format!("deph{s}"),
            components: vec![LocalOperator::new(vec![s], pauli_z().scale_real(gamma.sqrt())).unwrap()],
        })
        .collect();
    LindbladModel::new(n, vec![field], jumps).unwrap()
}

fn assert_physical(rho: &DensityMatrix, tol: f64) -> Result<(), TestCaseError> {
    prop_assert!((rho.trace().re - 1.0).abs() < tol);
    prop_assert!(rho.trace().im.abs() < tol);
    prop_assert!(rho.matrix().hermitian_deviation() < tol);
    prop_assert!(rho.min_eigenvalue().unwrap() > -tol);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn backends_agree(
        seed in any::<u64>(),
        n in 2usize..5,
        gamma in 0.0f64..2.0,
        t in 0.0f64..1.5,
        r in 1usize..6,
        first in any::<bool>(),
    ) {
        let m = build_tfim(n, 1.0, 0.7, gamma).unwrap();
        let rho = random_density(&mut rng(seed), n);
        let order = if first { TrotterOrder::First } else { TrotterOrder::Second };
        let a = trotter_evolve(&m, &rho, t, r, order, ChannelBackend::SuperopExp).unwrap();
        let b = trotter_evolve(&m, &rho, t, r, order, ChannelBackend::LocalApply).unwrap();
        prop_assert!(trace_distance(&a, &b).unwrap() < 1e-10);
    }

    #[test]
    fn exact_routes_agree(seed in any::<u64>(), n in 2usize..4, gamma in 0.0f64..2.0, t in 0.0f64..1.0) {
        let m = build_tfim(n, 1.0, 0.5, gamma).unwrap();
        let rho = random_density(&mut rng(seed), n);
        let dense = exact_evolution_with(&m, &rho, t, ExactMethod::DenseExpm).unwrap();
        let taylor = exact_evolution_with(&m, &rho, t, ExactMethod::TaylorAction).unwrap();
        let rk4 = exact_evolution_with(&m, &rho, t, ExactMethod::Rk4).unwrap();
        prop_assert!(trace_distance(&dense, &taylor).unwrap() < 1e-9);
        prop_assert!(trace_distance(&dense, &rk4).unwrap() < 1e-9);
        assert_physical(&dense, 1e-10)?;
    }

    #[test]
    fn trotter_output_is_a_state(
        seed in any::<u64>(),
        n in 1usize..5,
        gamma in 0.0f64..3.0,
        tau in 0.0f64..2.0,
        steps in 1usize..4,
        local in any::<bool>(),
    ) {
        let n = n.max(2);
        let m = build_tfim(n, 1.3, -0.8, gamma).unwrap();
        let rho = random_density(&mut rng(seed), n);
        let backend = BACKENDS[local as usize];
        for order in [TrotterOrder::First, TrotterOrder::Second] {
            let stepper = TrotterStepper::new(&m, tau, order, backend).unwrap();
            assert_physical(&stepper.evolve(&rho, steps).unwrap(), 1e-10)?;
        }
    }

    #[test]
    fn step_is_completely_positive(gamma in 0.0f64..3.0, tau in 0.0f64..2.0, j in -2.0f64..2.0) {
        let m = build_tfim(2, j, 0.5, gamma).unwrap();
        for order in [TrotterOrder::First, TrotterOrder::Second] {
            let s = TrotterStepper::new(&m, tau, order, ChannelBackend::LocalApply)
                .unwrap()
                .superop_matrix()
                .unwrap();
            let choi = choi_matrix(&s, 4).unwrap();
            prop_assert!(choi.hermitian_deviation() < 1e-12);
            let low = hermitian_eigenvalues(&choi.hermitian_part()).unwrap()[0];
            prop_assert!(low > -1e-11, "Choi eigenvalue {low:e}");
        }
    }

    #[test]
    fn step_contracts_trace_distance(seed in any::<u64>(), gamma in 0.0f64..2.0, tau in 0.0f64..1.0) {
        let mut r = rng(seed);
        let m = build_tfim(3, 1.0, 0.5, gamma).unwrap();
        let a = random_density(&mut r, 3);
        let b = random_density(&mut r, 3);
        let stepper = TrotterStepper::new(&m, tau, TrotterOrder::Second, ChannelBackend::LocalApply).unwrap();
        let before = trace_distance(&a, &b).unwrap();
        let after = trace_distance(&stepper.step(&a).unwrap(), &stepper.step(&b).unwrap()).unwrap();
        prop_assert!(after <= before + 1e-12);
    }

    #[test]
    fn commuting_summands_split_exactly(
        seed in any::<u64>(),
        n in 2usize..4,
        h in -2.0f64..2.0,
        gamma in 0.0f64..2.0,
        t in 0.0f64..2.0,
    ) {
        let m = commuting_model(n, h, gamma);
        let rho = random_density(&mut rng(seed), n);
        let exact = exact_evolution_with(&m, &rho, t, ExactMethod::DenseExpm).unwrap();
        for order in [TrotterOrder::First, TrotterOrder::Second] {
            for backend in BACKENDS {
                let got = trotter_evolve(&m, &rho, t, 1, order, backend).unwrap();
                prop_assert!(trace_distance(&got, &exact).unwrap() < 1e-11);
            }
        }
    }
}

#[test]
fn symmetric_step_has_no_quadratic_error() {
    for gamma in [0.0, 0.1, 1.0] {
        let m = build_tfim(3, 1.0, 0.5, gamma).unwrap();
        let (c2, c3) = step_error_coefficients(&m, 0.05).unwrap();
        assert!(c3 > 0.1, "cubic coefficient should be visible, got {c3:e}");
        assert!(c2 < 1e-6 * c3, "c2 = {c2:e}, c3 = {c3:e}");
    }
}

fn observed_order(m: &LindbladModel, order: TrotterOrder, t: f64, r: usize) -> f64 {
    let rho = InitialState::AllPlus.prepare(m.n_sites());
    let e1 = trace_distance_error(m, &rho, t, r, order, ChannelBackend::LocalApply).unwrap();
    let e2 = trace_distance_error(m, &rho, t, 2 * r, order, ChannelBackend::LocalApply).unwrap();
    (e1 / e2).log2()
}

#[test]
fn global_error_orders() {
    for gamma in [0.1, 1.0] {
        let m = build_tfim(3, 1.0, 0.5, gamma).unwrap();
        let p1 = observed_order(&m, TrotterOrder::First, 1.0, 64);
        let p2 = observed_order(&m, TrotterOrder::Second, 1.0, 32);
        assert!((p1 - 1.0).abs() < 0.05, "first order slope {p1}");
        assert!((p2 - 2.0).abs() < 0.05, "second order slope {p2}");
    }
}

#[test]
fn zero_time_is_identity() {
    let m = build_tfim(3, 1.0, 0.5, 0.3).unwrap();
    let rho = random_density(&mut rng(7), 3);
    for backend in BACKENDS {
        let out = trotter_evolve(&m, &rho, 0.0, 3, TrotterOrder::Second, backend).unwrap();
        assert!(out.matrix().approx_eq(rho.matrix(), 1e-14));
    }
    let e = exact_evolution(&m, &rho, 0.0).unwrap();
    assert!(e.matrix().approx_eq(rho.matrix(), 1e-14));
}

#[test]
fn stepper_matrix_matches_action() {
    let m = build_tfim(2, 0.8, 1.1, 0.4).unwrap();
    let rho = random_density(&mut rng(3), 2);
    let stepper = TrotterStepper::new(&m, 0.3, TrotterOrder::Second, ChannelBackend::SuperopExp).unwrap();
    let s = stepper.superop_matrix().unwrap();
    let via_matrix = lindblad_core::linalg::matvec(&s, &lindblad_core::linalg::vec_columns(rho.matrix())).unwrap();
    let back = lindblad_core::linalg::unvec_columns(&via_matrix, 4).unwrap();
    let mut direct: ComplexMatrix = rho.matrix().clone();
    stepper.apply_in_place(&mut direct);
    assert!(back.approx_eq(&direct, 1e-13));
}

#[test]
fn bad_inputs_are_rejected() {
    let m = build_tfim(3, 1.0, 0.5, 0.1).unwrap();
    let rho = InitialState::AllZeros.prepare(3);
    let wrong = InitialState::AllZeros.prepare(2);
    assert!(trotter_evolve(&m, &rho, 1.0, 0, TrotterOrder::Second, ChannelBackend::LocalApply).is_err());
    assert!(trotter_evolve(&m, &rho, -1.0, 2, TrotterOrder::Second, ChannelBackend::LocalApply).is_err());
    assert!(trotter_evolve(&m, &wrong, 1.0, 2, TrotterOrder::Second, ChannelBackend::LocalApply).is_err());
    assert!(exact_evolution(&m, &rho, f64::NAN).is_err());
    assert!(TrotterOrder::from_int(3).is_err());
}
