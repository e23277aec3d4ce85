mod common;

use common::*;
use lindblad_core::linalg::ComplexMatrix;
use lindblad_core::model::*;
use lindblad_core::propagate::*;
use lindblad_core::richardson::*;
use proptest::prelude::*;

fn moment(r: &[u64], b: &[f64], kappa: i32) -> f64 {
    r.iter().zip(b).map(|(&r, b)| b * (r as f64).powi(-2 * kappa)).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn arbitrary_distinct_nodes_cancel_moments(mut r in prop::collection::btree_set(1u64..200, 1..6)) {
        let r: Vec<u64> = std::mem::take(&mut r).into_iter().collect();
        let b = coefficients(&r).unwrap();
        let scale = l1_norm(&b);
        prop_assert!((moment(&r, &b, 0) - 1.0).abs() < 1e-9 * scale);
        for kappa in 1..r.len() as i32 {
            let tol = 1e-9 * scale * (*r.iter().min().unwrap() as f64).powi(-2 * kappa);
            prop_assert!(moment(&r, &b, kappa).abs() < tol);
        }
    }
}

#[test]
fn node_moments_vanish() {
    for p in 1..=8 {
        let r = nodes(p).unwrap();
        let b = coefficients(&r).unwrap();
        assert!((moment(&r, &b, 0) - 1.0).abs() < 1e-12, "p={p}");
        for kappa in 1..p as i32 {
            assert!(moment(&r, &b, kappa).abs() < 1e-12, "p={p} kappa={kappa}");
        }
        // the next moment survives
        assert!(moment(&r, &b, p as i32).abs() > 0.0);
        let plan = ExtrapolationPlan::with_order(1.0, 1, p, 0, 0).unwrap();
        assert!((plan.moment(0) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn nodes_are_distinct_and_decreasing() {
    for p in 1..=12 {
        let r = nodes(p).unwrap();
        assert_eq!(r.len(), p);
        assert!(r.windows(2).all(|w| w[0] > w[1]), "p={p}: {r:?}");
        assert!(*r.last().unwrap() >= 1);
    }
}

#[test]
fn coefficient_norm_grows_slowly() {
    let mut last = 0.0;
    for p in 1..=12 {
        let l1 = l1_norm(&coefficients(&nodes(p).unwrap()).unwrap());
        assert!(l1 >= last - 1e-12, "p={p}");
        assert!(l1 <= 1.0 + 2.0 / std::f64::consts::PI * ((p + 1) as f64).ln(), "p={p}: {l1}");
        last = l1;
    }
}

#[test]
fn duplicate_nodes_are_singular() {
    assert!(coefficients(&[4, 4]).is_err());
    assert!(coefficients(&[0, 2]).is_err());
    assert!(coefficients(&[]).is_err());
    assert!(extrapolate(&[1.0], &[0.5, 0.5]).is_err());
}

#[test]
fn sampled_mean_obeys_hoeffding() {
    let n = 3;
    let m = build_tfim(n, 1.0, 0.5, 0.3).unwrap();
    let rho = exact_evolution(&m, &InitialState::AllPlus.prepare(n), 0.7).unwrap();
    let obs = total_magnetization(n);
    let exact = expectation(&obs, &rho).unwrap();
    let shots = 100_000u64;
    // outcomes lie in [-N, N]; failure probability 1e-6
    let radius = 2.0 * n as f64 * ((2.0f64 / 1e-6).ln() / (2.0 * shots as f64)).sqrt();
    for seed in 0..5 {
        let got = sample_diagonal_mean(&obs, &rho, shots, seed, 0).unwrap();
        assert!((got - exact).abs() <= radius, "seed {seed}: {got} vs {exact}");
    }
}

#[test]
fn sampled_mean_is_unbiased() {
    let n = 2;
    let rho = random_density(&mut rng(5), n);
    let obs = total_magnetization(n);
    let exact = expectation(&obs, &rho).unwrap();
    let shots = 1000u64;
    let means: Vec<f64> = (0..200)
        .map(|seed| sample_diagonal_mean(&obs, &rho, shots, seed, 1).unwrap())
        .collect();
    let avg = means.iter().sum::<f64>() / means.len() as f64;
    let var = means.iter().map(|x| (x - avg).powi(2)).sum::<f64>() / (means.len() - 1) as f64;
    let se = (var / means.len() as f64).sqrt();
    assert!((avg - exact).abs() < 5.0 * se, "{avg} vs {exact}, se {se}");
}

#[test]
fn extrapolation_beats_the_finest_node() {
    for gamma in [0.1, 1.0] {
        let n = 3;
        let m = build_tfim(n, 1.0, 0.5, gamma).unwrap();
        let rho0 = InitialState::AllOnes.prepare(n);
        let obs = total_magnetization(n);
        let t = 1.0;
        let exact = expectation(&obs, &exact_evolution(&m, &rho0, t).unwrap()).unwrap();
        for p in 2..=3 {
            let plan = ExtrapolationPlan::with_order(t, 1, p, 0, 0).unwrap();
            let out = run_extrapolation(&m, &obs, &rho0, &plan, ChannelBackend::LocalApply).unwrap();
            let raw = (out.per_node_means.last().unwrap() - exact).abs();
            let extrap = (out.estimate - exact).abs();
            assert!(extrap < raw, "gamma={gamma} p={p}: {extrap:e} vs {raw:e}");
        }
    }
}

#[test]
fn zero_generator_returns_initial_value() {
    let m = LindbladModel::new(2, vec![], vec![]).unwrap();
    let rho0 = random_density(&mut rng(9), 2);
    let obs = total_magnetization(2);
    let plan = ExtrapolationPlan::with_order(2.0, 3, 3, 0, 0).unwrap();
    let out = run_extrapolation(&m, &obs, &rho0, &plan, ChannelBackend::LocalApply).unwrap();
    let want = expectation(&obs, &rho0).unwrap();
    assert!((out.estimate - want).abs() < 1e-12);
}

#[test]
fn sampling_ignores_thread_count() {
    let rho = random_density(&mut rng(2), 3);
    let obs = total_magnetization(3);
    let shots = 5 * SHOT_BATCH + 17;
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sample_diagonal_mean(&obs, &rho, shots, 42, 3).unwrap())
    };
    let one = run(1);
    assert_eq!(one.to_bits(), run(4).to_bits());
    assert_eq!(one.to_bits(), run(7).to_bits());
    assert_ne!(one.to_bits(), sample_diagonal_mean(&obs, &rho, shots, 43, 3).unwrap().to_bits());
}

#[test]
fn sampling_needs_a_diagonal_observable() {
    let rho = InitialState::AllPlus.prepare(1);
    let x: ComplexMatrix = pauli_x();
    assert!(sample_diagonal_mean(&x, &rho, 10, 0, 0).is_err());
    assert!(sample_diagonal_mean(&pauli_z(), &rho, 0, 0, 0).is_err());
}
