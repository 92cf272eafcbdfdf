mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{check_descent, check_gradient, check_quasiconvexity, spec_strategy, TARGET_TOL};
use recbound::descent::{feasible_start, project_perp, solve, SolveStatus, SolverConfig};
use recbound::model::WeightVector;
use recbound::scalar::{r_from_exponents, RootFinder};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn term_roots_are_quasiconvex(spec in spec_strategy(), seed in any::<u64>()) {
        prop_assert_eq!(check_quasiconvexity(&spec, seed), Ok(()));
    }

    #[test]
    fn root_gradient_opposes_descent_normal(spec in spec_strategy(), seed in any::<u64>()) {
        let worst = check_gradient(&spec, seed);
        prop_assert!(worst.is_ok(), "{:?}", worst);
    }

    #[test]
    fn descent_invariants(spec in spec_strategy(), seed in any::<u64>()) {
        let check = check_descent(&spec, seed);
        prop_assert!(check.is_ok(), "{:?}", check.err());
    }

    #[test]
    fn characteristic_function_is_monotone(exps in proptest::collection::vec(0.05f64..4.0, 2..6), c1 in 1.0f64..50.0, gap in 1e-6f64..10.0) {
        prop_assert!(r_from_exponents(&exps, c1) < r_from_exponents(&exps, c1 + gap));
    }

    #[test]
    fn doubled_weights_take_square_root(exps in proptest::collection::vec(0.05f64..4.0, 2..6)) {
        let finder = RootFinder::default();
        let one = finder.root_of_exponents("x", exps.clone()).unwrap().value;
        let two = finder.root_of_exponents("x", exps.iter().map(|a| 2.0 * a).collect()).unwrap().value;
        prop_assert!((two - one.sqrt()).abs() <= 2.0 * finder.tol * one, "{} vs {}", two, one.sqrt());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn solver_dominates_sampled_weights(spec in spec_strategy(), seed in any::<u64>()) {
        let report = solve(&spec, &SolverConfig::with_tol(TARGET_TOL)).unwrap();
        prop_assume!(report.status != SolveStatus::Infeasible);
        let start = feasible_start(&spec, seed).unwrap();
        let finder = RootFinder::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..100 {
            let noise: Vec<f64> = (0..spec.dimension()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let noise = project_perp(&noise, spec.target());
            let scale: f64 = rng.gen_range(0.0..1.0);
            let mut w = WeightVector::new(start.iter().zip(&noise).map(|(a, b)| a + scale * b).collect());
            w.project_to_hyperplane(spec.target());
            let c = finder.c_of_w(&spec, &w).c;
            prop_assert!(report.c <= c + TARGET_TOL * c.max(1.0), "solver {} above sample {}", report.c, c);
        }
    }
}
