mod common;

use common::*;
use lindblad_core::linalg::{vec_columns, ComplexMatrix, C64};
use lindblad_core::model::*;
use proptest::prelude::*;

fn dense_tfim_liouvillian(n: usize, j: f64, h: f64, gamma: f64) -> ComplexMatrix {
    let mut l = coherent_superop(&tfim_hamiltonian(n, j, h));
    let jump = lowering().scale_real(gamma.sqrt());
    for s in 0..n {
        l = &l + &dissipator_superop(&on_site(&jump, s, n));
    }
    l
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn liouvillian_matches_dense_construction(
        n in 2usize..5,
        j in -2.0f64..2.0,
        h in -2.0f64..2.0,
        gamma in 0.0f64..2.0,
    ) {
        let m = build_tfim(n, j, h, gamma).unwrap();
        let got = model_liouvillian(&m).unwrap();
        let want = dense_tfim_liouvillian(n, j, h, gamma);
        prop_assert!(got.approx_eq(&want, 1e-12));
    }

    #[test]
    fn summands_add_up(n in 2usize..5, j in -2.0f64..2.0, h in -2.0f64..2.0, gamma in 0.0f64..2.0) {
        let m = build_tfim(n, j, h, gamma).unwrap();
        let total = model_liouvillian(&m).unwrap();
        let d = m.dim() * m.dim();
        let mut sum = ComplexMatrix::zeros(d, d);
        for s in summand_superops(&m) {
            sum = &sum + &liouvillian_matrix(&s, n).unwrap();
        }
        prop_assert!(sum.approx_eq(&total, 1e-12));
    }

    #[test]
    fn every_summand_is_trace_annihilating(n in 2usize..5, gamma in 0.0f64..2.0) {
        // vec(I)† L = 0 for every generator of a trace-preserving semigroup
        let m = build_tfim(n, 1.0, 0.5, gamma).unwrap();
        let id = vec_columns(&ComplexMatrix::identity(m.dim()));
        for s in summand_superops(&m) {
            let l = liouvillian_matrix(&s, n).unwrap();
            for col in 0..l.cols() {
                let acc: C64 = (0..l.rows()).map(|row| id[row].conj() * l[(row, col)]).sum();
                prop_assert!(acc.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn compress_preserves_action(n in 2usize..4, j in -2.0f64..2.0, gamma in 0.0f64..2.0) {
        let m = build_tfim(n, j, 0.3, gamma).unwrap();
        for s in summand_superops(&m) {
            let c = s.compress();
            prop_assert!(liouvillian_matrix(&c, n).unwrap().approx_eq(&liouvillian_matrix(&s, n).unwrap(), 1e-12));
            prop_assert!(c.norm_bound() <= s.norm_bound() * (1.0 + 1e-12));
            prop_assert!(c.len() <= s.len());
        }
    }

    #[test]
    fn components_sum_to_the_model(n in 2usize..5, gamma in 0.0f64..2.0) {
        let m = build_tfim(n, 1.0, 0.5, gamma).unwrap();
        let total = model_liouvillian(&m).unwrap();
        let comps = local_components(&m);
        let sum = PairFormSuperop::sum(comps.iter());
        prop_assert!(liouvillian_matrix(&sum, n).unwrap().approx_eq(&total, 1e-12));
        for c in &comps {
            prop_assert!(c.support().len() <= m.k());
        }
    }
}

#[test]
fn tfim_shape() {
    let m = build_tfim(5, 1.0, 0.5, 0.1).unwrap();
    assert_eq!(m.num_summands(), 7);
    assert_eq!(m.k(), 2);
    assert_eq!(m.gamma_cap(), 1);
    assert_eq!(m.hamiltonian_terms()[0].pieces.len(), 4);
    assert_eq!(m.hamiltonian_terms()[1].pieces.len(), 5);
    assert_eq!(m.jump_operators().len(), 5);
    assert!(build_tfim(1, 1.0, 0.5, 0.1).is_err());
    assert!(build_tfim(3, 1.0, 0.5, -0.1).is_err());
}

#[test]
fn extensiveness_counts_local_strength() {
    // interior site: two XX bonds at 2|J| each, a field at 2|h|, a jump at 2γ
    for (j, h, gamma) in [(1.0, 0.5, 0.1), (0.3, 2.0, 1.0), (-1.5, 0.0, 0.0)] {
        let m = build_tfim(6, j, h, gamma).unwrap();
        let want = 4.0 * f64::abs(j) + 2.0 * f64::abs(h) + 2.0 * gamma;
        assert!((extensiveness_g(&m) - want).abs() < 1e-12);
    }
}

#[test]
fn out_of_range_sites_are_rejected() {
    let bad = LocalOperator::new(vec![1, 0], ComplexMatrix::identity(4));
    assert!(bad.is_err());
    let term = HamiltonianTerm {
        label: "Z".into(),
        pieces: vec![LocalOperator::new(vec![3], pauli_z()).unwrap()],
    };
    assert!(LindbladModel::new(2, vec![term], vec![]).is_err());
    let non_herm = HamiltonianTerm {
        label: "L".into(),
        pieces: vec![LocalOperator::new(vec![0], lowering()).unwrap()],
    };
    assert!(LindbladModel::new(1, vec![non_herm], vec![]).is_err());
}

#[test]
fn embedding_places_site_zero_first() {
    let x0 = LocalOperator::new(vec![0], pauli_x()).unwrap();
    let got = x0.embed(&[0, 1, 2]);
    assert!(got.approx_eq(&on_site(&pauli_x(), 0, 3), 0.0));
    let z2 = LocalOperator::new(vec![2], pauli_z()).unwrap();
    assert!(z2.embed(&[0, 1, 2]).approx_eq(&on_site(&pauli_z(), 2, 3), 0.0));
}
