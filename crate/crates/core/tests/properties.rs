use bpdn_core::scaling::{limit_chi_square, ChiSquareOptions, ThinningOptions};
use bpdn_core::{objective_gap, sa_iterations, soft_threshold, solve, Problem, SolverOptions};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn problem_strategy() -> impl Strategy<Value = (Problem, Vec<f64>)> {
    (1usize..=5, 1usize..=5).prop_flat_map(|(n, p)| {
        (
            prop::collection::vec(-3.0f64..3.0, n * p),
            prop::collection::vec(-4.0f64..4.0, n),
            0.05f64..3.0,
            prop::collection::vec(-5.0f64..5.0, p),
        )
            .prop_map(move |(a, y, t, x)| {
                let problem = Problem::new(DMatrix::from_row_slice(n, p, &a), DVector::from_vec(y), t).unwrap();
                (problem, x)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn gap_matches_objective_excess((problem, x) in problem_strategy()) {
        let sol = solve(&problem, &SolverOptions::default()).unwrap();
        let excess = problem.objective(&x).unwrap() - sol.m;
        let gap = objective_gap(&problem, &sol, &x).unwrap();
        prop_assert!(gap >= -1e-9);
        prop_assert!((excess - gap).abs() <= 1e-8 * excess.abs().max(1.0));
    }

    #[test]
    fn minimum_is_below_random_points((problem, x) in problem_strategy()) {
        let sol = solve(&problem, &SolverOptions::default()).unwrap();
        prop_assert!(problem.objective(&x).unwrap() >= sol.m - 1e-10);
    }

    #[test]
    fn objective_is_convex((problem, x) in problem_strategy(), lambda in 0.0f64..1.0) {
        let z = vec![0.7; x.len()];
        let mix: Vec<f64> = x.iter().zip(&z).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
        let f = |v: &[f64]| problem.objective(v).unwrap();
        prop_assert!(f(&mix) <= lambda * f(&x) + (1.0 - lambda) * f(&z) + 1e-9);
    }

    #[test]
    fn certificate_is_a_subgradient((problem, _x) in problem_strategy()) {
        let sol = solve(&problem, &SolverOptions::default()).unwrap();
        for (x, xi) in sol.x_star.iter().zip(&sol.xi) {
            prop_assert!(xi.abs() <= 1.0 + 1e-6);
            if x.abs() > 1e-6 {
                prop_assert!((xi - x.signum()).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn scalar_solver_is_soft_threshold(y in -20.0f64..20.0, t in 0.01f64..10.0) {
        let sol = solve(&Problem::scalar(y, t).unwrap(), &SolverOptions::default()).unwrap();
        prop_assert!((sol.x_star[0] - soft_threshold(y, t).unwrap()).abs() <= 1e-8);
    }

    #[test]
    fn annealing_budget_reaches_target(target in 1e-6f64..0.9, q in 1.0001f64..1.5) {
        let n = sa_iterations(1.0, target, q).unwrap();
        prop_assert!(1.0 / q.powf(n as f64) <= target * (1.0 + 1e-12));
        prop_assert!(n == 0 || 1.0 / q.powf(n as f64 - 1.0) > target);
    }
}

#[test]
fn correlated_design_passes_chi_square_at_lower_temperature() {
    let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.3, 1.0]);
    let problem = Problem::new(a, DVector::from_vec(vec![2.0, 0.3]), 0.5).unwrap();
    let r = limit_chi_square(
        &problem,
        1e-4,
        &ChiSquareOptions::default(),
        &ThinningOptions::default(),
    )
    .unwrap();
    assert!(r.passed, "{r:?}");
}

#[test]
fn three_coordinates_chi_square() {
    let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    let problem = Problem::new(a, DVector::from_vec(vec![2.0, 0.2, -1.5]), 0.5).unwrap();
    let opts = ChiSquareOptions {
        bins_per_axis: 4,
        ..Default::default()
    };
    let r = limit_chi_square(&problem, 1e-3, &opts, &ThinningOptions::default()).unwrap();
    assert!(r.passed, "{r:?}");
}
