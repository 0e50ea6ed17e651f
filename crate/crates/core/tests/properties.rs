use gaussmarg::analytic::{
    entropy_mixed, entropy_single, finite_n_purity, page_slope, renyi_trace_continued, renyi_trace_mixed,
    renyi_trace_single,
};
use gaussmarg::constraints::{build_constraint_matrix, hat_projection, ConstraintSpec, Scenario};
use gaussmarg::replica::{
    closed_form_product, master_determinant, toeplitz_cofactor, toeplitz_cofactor_direct, ReplicaProblem,
};
use gaussmarg::sampler::siegel::Chart;
use gaussmarg::symplectic::{
    covariance_from_symplectic, random_passive, random_symplectic, restrict, symplectic_residual, symplectic_spectrum,
    CovarianceMatrix, ModeSubset, SymplecticMatrix,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn pure_state(n: usize, bound: f64, seed: u64) -> (SymplecticMatrix, CovarianceMatrix) {
    let s = random_symplectic(n, bound, seed).unwrap();
    let c = covariance_from_symplectic(&s);
    (s, c)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_symplectic_preserves_form(n in 1usize..6, bound in 0.0..1.5f64, seed: u64) {
        let (s, c) = pure_state(n, bound, seed);
        prop_assert!(symplectic_residual(s.matrix()).unwrap() < 1e-10);
        prop_assert!(c.purity_residual() < 1e-8);
    }

    #[test]
    fn marginals_are_physical_and_entropy_is_symmetric(n in 2usize..6, n_a in 1usize..3, seed: u64) {
        prop_assume!(n_a < n);
        let (_, c) = pure_state(n, 0.8, seed);
        let a = ModeSubset::first(n, n_a).unwrap();
        let b = ModeSubset::new(n, (n_a..n).collect()).unwrap();
        let (c_a, c_b) = (restrict(&c, &a).unwrap(), restrict(&c, &b).unwrap());
        prop_assert!(symplectic_spectrum(&c_a).unwrap().is_physical(1e-10));
        let (s_a, s_b) = (entropy_mixed(&c_a).unwrap(), entropy_mixed(&c_b).unwrap());
        prop_assert!(s_a >= 0.0);
        prop_assert!((s_a - s_b).abs() < 1e-8 * (1.0 + s_a), "{} vs {}", s_a, s_b);
    }

    #[test]
    fn local_gauge_leaves_covariance_unchanged(n in 1usize..6, seed: u64, gauge_seed: u64) {
        let (s, c) = pure_state(n, 1.0, seed);
        let u = random_passive(n, gauge_seed);
        let c2 = covariance_from_symplectic(&s.compose(&u));
        prop_assert!((c.matrix() - c2.matrix()).amax() < 1e-10 * c.matrix().amax());
        let a = ModeSubset::first(n, 1).unwrap();
        let p1 = renyi_trace_mixed(&restrict(&c, &a).unwrap(), 2).unwrap();
        let p2 = renyi_trace_mixed(&restrict(&c2, &a).unwrap(), 2).unwrap();
        prop_assert!((p1 - p2).abs() < 1e-10);
    }

    #[test]
    fn purity_equals_inverse_sqrt_determinant(n in 2usize..5, n_a in 1usize..3, seed: u64) {
        prop_assume!(n_a < n);
        let (_, c) = pure_state(n, 0.7, seed);
        let c_a = restrict(&c, &ModeSubset::first(n, n_a).unwrap()).unwrap();
        let want = c_a.matrix().determinant().powf(-0.5);
        prop_assert!(rel(renyi_trace_mixed(&c_a, 2).unwrap(), want) < 1e-10);
    }

    #[test]
    fn renyi_traces_decrease_with_order(lambda in 1.01..50.0f64, x in 2u32..9) {
        let a = renyi_trace_single(lambda, x).unwrap();
        let b = renyi_trace_single(lambda, x + 1).unwrap();
        prop_assert!(b < a && a <= 1.0);
        prop_assert!(rel(renyi_trace_continued(lambda, x as f64).unwrap(), a) < 1e-14);
    }

    #[test]
    fn master_determinant_matches_product(mus in prop::collection::vec(1.0001..20.0f64, 1..4), x in 2usize..9) {
        let got = master_determinant(&ReplicaProblem::from_mus(x, &mus).unwrap()).unwrap();
        let want = closed_form_product(&mus, x).unwrap();
        prop_assert!(rel(got, want) < 1e-9, "{} vs {}", got, want);
    }

    #[test]
    fn cofactor_closed_form(mu in 1.0..30.0f64, x in 2usize..12) {
        let a = toeplitz_cofactor(mu, x).unwrap();
        let b = toeplitz_cofactor_direct(mu, x).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
    }

    #[test]
    fn finite_n_purity_approaches_inverse_lambda(lambda in 1.01..10.0f64, n in 2usize..200) {
        let c_hat = CovarianceMatrix::new(DMatrix::identity(2, 2) * lambda).unwrap();
        let p = finite_n_purity(&c_hat, n, 1).unwrap();
        prop_assert!(rel(p, n as f64 / (n as f64 - 1.0) / lambda) < 1e-12);
    }

    #[test]
    fn page_slope_increments_are_single_mode_entropies(lambdas in prop::collection::vec(1.01..8.0f64, 1..8)) {
        let spec = ConstraintSpec::scenario_one(&lambdas).unwrap();
        let order: Vec<usize> = (0..lambdas.len()).rev().collect();
        let curve = page_slope(&spec, &order).unwrap();
        for (k, w) in curve.windows(2).enumerate() {
            let step = w[1].1 - w[0].1;
            prop_assert!((step - entropy_single(lambdas[order[k]]).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn hat_projection_is_idempotent_and_fixes_constraints(lambdas in prop::collection::vec(1.01..8.0f64, 2..6), split in 1usize..5) {
        let split = split.min(lambdas.len() - 1);
        let windows = vec![lambdas[..split].to_vec(), lambdas[split..].to_vec()];
        let spec = ConstraintSpec::new(Scenario::II, windows).unwrap();
        let c_hat = build_constraint_matrix(&spec);
        let h = hat_projection(&c_hat, &spec).unwrap();
        prop_assert_eq!(h.matrix(), c_hat.matrix());
        let (_, c) = pure_state(lambdas.len(), 0.6, split as u64);
        let once = hat_projection(&c, &spec).unwrap();
        let twice = hat_projection(&once, &spec).unwrap();
        prop_assert_eq!(once.matrix(), twice.matrix());
    }

    #[test]
    fn siegel_chart_roundtrip(n in 1usize..5, seed: u64) {
        let (_, c) = pure_state(n, 0.8, seed);
        let spec = ConstraintSpec::scenario_one(&vec![2.0; n]).unwrap();
        let chart = Chart::new(&spec);
        let z = chart.coords_of(c.matrix()).unwrap();
        let pt = chart.point(&z).unwrap();
        let back = chart.covariance(&pt);
        prop_assert!((back - c.matrix()).amax() < 1e-9 * c.matrix().amax());
        let s = chart.symplectic(&pt);
        prop_assert!(symplectic_residual(&s).unwrap() < 1e-9);
    }
}
