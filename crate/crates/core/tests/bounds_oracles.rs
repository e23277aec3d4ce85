mod common;

use common::*;
use lindblad_core::bounds::*;
use lindblad_core::linalg::{spectral_norm, ComplexMatrix};
use lindblad_core::model::*;
use lindblad_core::propagate::*;
use lindblad_core::Error;
use proptest::prelude::*;

fn dense_summands(m: &LindbladModel) -> Vec<ComplexMatrix> {
    summand_superops(m)
        .iter()
        .map(|s| liouvillian_matrix(s, m.n_sites()).unwrap())
        .collect()
}

fn dense_comm(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    &(a * b) - &(b * a)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn pruning_is_sound(j in -2.0f64..2.0, h in -2.0f64..2.0, gamma in 0.0f64..2.0) {
        let m = build_tfim(3, j, h, gamma).unwrap();
        for q in 2..=3 {
            let a = alpha_comm_q(&m, q).unwrap();
            let b = alpha_comm_q_unpruned(&m, q).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * b.max(1.0), "q={q}: {a} vs {b}");
        }
    }

    #[test]
    fn pair_form_commutator_matches_dense(j in -2.0f64..2.0, h in -2.0f64..2.0, gamma in 0.0f64..2.0) {
        let m = build_tfim(3, j, h, gamma).unwrap();
        let pf = summand_superops(&m);
        let dense = dense_summands(&m);
        for a in 0..pf.len() {
            for b in 0..pf.len() {
                let got = liouvillian_matrix(&pairform_commutator(&pf[a], &pf[b]), 3).unwrap();
                let want = dense_comm(&dense[a], &dense[b]);
                prop_assert!(got.approx_eq(&want, 1e-11));
                let unpruned = liouvillian_matrix(&pairform_commutator_unpruned(&pf[a], &pf[b]), 3).unwrap();
                prop_assert!(unpruned.approx_eq(&want, 1e-11));
            }
        }
    }
}

#[test]
fn nested_sums_dominate_dense_norms() {
    // The pair-form bound is at least the vec-space operator norm, term by term.
    for gamma in [0.0, 0.1, 1.0] {
        let m = build_tfim(3, 1.0, 0.5, gamma).unwrap();
        let d = dense_summands(&m);
        let mut q2 = 0.0;
        let mut q3 = 0.0;
        for a in &d {
            for b in &d {
                let ab = dense_comm(a, b);
                q2 += spectral_norm(&ab);
                for c in &d {
                    q3 += spectral_norm(&dense_comm(c, &ab));
                }
            }
        }
        let a2 = alpha_comm_q(&m, 2).unwrap();
        let a3 = alpha_comm_q(&m, 3).unwrap();
        assert!(q2 <= a2 * (1.0 + 1e-10), "{q2} > {a2}");
        assert!(q3 <= a3 * (1.0 + 1e-10), "{q3} > {a3}");
        // and not absurdly loose: same order of magnitude
        if gamma > 0.0 {
            assert!(a3 < 20.0 * q3);
        }
    }
}

#[test]
fn lattice_bound_dominates() {
    for n in [3, 4] {
        for gamma in [0.1, 1.0] {
            let m = build_tfim(n, 1.0, 0.5, gamma).unwrap();
            let g = extensiveness_g(&m);
            for q in 2..=4 {
                let a = alpha_comm_q(&m, q).unwrap();
                let lat = alpha_lattice_q(n, m.k(), g, q);
                assert!(a <= lat, "N={n} gamma={gamma} q={q}: {a} > {lat}");
            }
            for grades in [[1usize, 2], [2, 1], [2, 2]] {
                let a = alpha_doubly_nested(&m, &grades).unwrap();
                let lat = alpha_doubly_lattice(n, m.k(), g, &grades);
                assert!(a <= lat, "{grades:?}: {a} > {lat}");
            }
        }
    }
}

#[test]
fn doubly_nested_reduces_to_single() {
    let m = build_tfim(3, 0.9, 0.4, 0.3).unwrap();
    let one = alpha_doubly_nested(&m, &[1]).unwrap();
    let direct: f64 = summand_superops(&m).iter().map(|s| s.compress().norm_bound()).sum();
    assert!((one - direct).abs() < 1e-12 * direct);
    for q in 2..=4 {
        let a = alpha_doubly_nested(&m, &[q]).unwrap();
        let b = alpha_comm_q(&m, q).unwrap();
        assert!((a - b).abs() < 1e-10 * b);
    }
    let pair = alpha_doubly_nested(&m, &[1, 1]).unwrap();
    let a2 = alpha_comm_q(&m, 2).unwrap();
    assert!((pair - a2).abs() < 1e-10 * a2);
    assert!(alpha_doubly_nested(&m, &[4, 3]).is_err());
    assert!(alpha_doubly_nested(&m, &[0, 2]).is_err());
    assert!(alpha_comm_q(&m, 6).is_err());
}

#[test]
fn one_step_bound_holds() {
    let mut r = rng(11);
    for gamma in [0.1, 1.0] {
        for n in [2, 3] {
            let m = build_tfim(n, 1.0, 0.5, gamma).unwrap();
            let tight = alpha3_tight(&m);
            for tau in [0.05, 0.1, 0.2] {
                let stepper = TrotterStepper::new(&m, tau, TrotterOrder::Second, ChannelBackend::LocalApply).unwrap();
                for _ in 0..5 {
                    let rho = random_density(&mut r, n);
                    let exact = exact_evolution_with(&m, &rho, tau, ExactMethod::DenseExpm).unwrap();
                    let err = trace_distance(&stepper.step(&rho).unwrap(), &exact).unwrap();
                    assert!(err <= tight.step_bound(tau), "N={n} tau={tau}: {err:e}");
                }
            }
        }
    }
}

#[test]
fn first_order_step_bound_holds() {
    let m = build_tfim(3, 1.0, 0.5, 0.5).unwrap();
    let a2 = alpha2_first_order(&m);
    for tau in [0.05, 0.1, 0.2] {
        for s in InitialState::ALL {
            let rho = s.prepare(3);
            let err = trace_distance_error(&m, &rho, tau, 1, TrotterOrder::First, ChannelBackend::LocalApply).unwrap();
            assert!(err <= 0.5 * tau * tau * a2);
        }
    }
}

#[test]
fn planned_steps_meet_precision() {
    for gamma in [0.1, 1.0] {
        let m = build_tfim(3, 1.0, 0.5, gamma).unwrap();
        let tight = alpha3_tight(&m);
        for eps in [1e-2, 1e-3] {
            let t = 1.0;
            let r = plan_trotter_steps(&m, t, eps).unwrap();
            // r is the smallest count whose summed step bound fits
            assert!(r as f64 * tight.step_bound(t / r as f64) <= eps * (1.0 + 1e-12));
            if r > 1 {
                let rm = (r - 1) as f64;
                assert!(rm * tight.step_bound(t / rm) > eps);
            }
            for s in InitialState::ALL {
                let err = trace_distance_error(&m, &s.prepare(3), t, r, TrotterOrder::Second, ChannelBackend::LocalApply)
                    .unwrap();
                assert!(err <= eps, "gamma={gamma} eps={eps} {}: {err:e}", s.name());
            }
        }
    }
}

#[test]
fn extrapolation_plan_is_minimal() {
    let m = build_tfim(2, 1.0, 0.5, 0.2).unwrap();
    let (t, eps, q0) = (0.5, 0.5, 3);
    let plan = plan_extrapolation(&m, t, eps, q0, 1).unwrap();
    let mu = mu_comm_q0(&m, q0).unwrap();
    let series = AlphaCommSeries::new(&m, q0).unwrap();
    let r_p = *plan.r_nodes.last().unwrap() as f64;
    let e = std::f64::consts::E;
    let ok = |n: u64| {
        let s_p = 1.0 / (n as f64 * r_p);
        let mu_ok = s_p <= (2.0 * mu * t).powf(-1.5) / e;
        let alpha_ok = series
            .evaluate(s_p * t)
            .total()
            .is_some_and(|a| a <= s_p * eps / (4.0 * e * plan.b_l1));
        mu_ok && alpha_ok
    };
    assert!(ok(plan.n));
    assert!(plan.n == 1 || !ok(plan.n - 1));
    assert!((-2.0 * plan.p as f64).exp() <= eps / (8.0 * plan.b_l1));
    let want_shots = (4.0 * plan.b_l1.powi(2) * (3.0 * plan.p as f64).ln() / (eps * eps)).ceil() as u64;
    assert_eq!(plan.shots, want_shots);
}

#[test]
fn long_times_are_infeasible() {
    let m = build_tfim(2, 1.0, 0.5, 0.2).unwrap();
    match plan_extrapolation(&m, 1e9, 0.1, 3, 0) {
        Err(Error::Infeasible(_)) => {}
        other => panic!("expected Infeasible, got {other:?}"),
    }
    assert!(plan_extrapolation(&m, 1.0, 1.5, 3, 0).is_err());
    assert!(plan_trotter_steps(&m, 0.0, 0.1).is_err());
}

#[test]
fn series_tail_gate() {
    let m = build_tfim(3, 1.0, 0.5, 0.1).unwrap();
    let s = AlphaCommSeries::new(&m, 3).unwrap();
    let g = extensiveness_g(&m);
    let edge = 1.0 / (8.0 * std::f64::consts::E.powi(2) * 3.0 * 2.0 * g);
    assert!(s.evaluate(edge * 0.99).certified());
    assert!(!s.evaluate(edge * 1.01).certified());
    // numeric part is a polynomial in t of degrees 4 and 5
    let a = s.evaluate(1e-3).numeric;
    let b = s.evaluate(2e-3).numeric;
    assert!(b / a > 16.0 && b / a < 32.0);
}
