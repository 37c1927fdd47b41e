//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line and
//! then asserts on the same condition. Run with `--nocapture` to see them.

use std::time::{Duration, Instant};

use bpdn_core::criteria::{rank_proposals, CriterionParams, CriterionRegime, MhSampler, ProposalFamily};
use bpdn_core::harness::{emit_figure_data, run_table4_mh, FigureParams, Table4Params, TABLE_VARIANCES};
use bpdn_core::limit::Regime;
use bpdn_core::limit::{m1, m2};
use bpdn_core::scaling::{
    boundary_sign_sweep, brute_force_gibbs_1d, gibbs_centered_moment_1d, limit_chi_square, verify_scaling_1d,
    ChiSquareOptions, ThinningOptions,
};
use bpdn_core::temperature::{
    consistent_temperature, interior_constraint, temp_from_bias_interior, temp_from_mse_interior, TemperatureTarget,
};
use bpdn_core::{objective_gap, sa_iterations, soft_threshold, solve, Problem, SolverOptions};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn report(id: u32, name: &str, passed: bool, elapsed: Duration, detail: &str) {
    let verdict = if passed { "PASS" } else { "FAIL" };
    println!(
        "criterion {id:>2} [{verdict}] {name} ({:.2} s): {detail}",
        elapsed.as_secs_f64()
    );
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

#[test]
fn criterion_01_scalar_solver_matches_soft_threshold() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for &t in &linspace(0.1, 5.0, 10) {
        for &y in &linspace(-5.0, 5.0, 201) {
            let sol = solve(&Problem::scalar(y, t).unwrap(), &SolverOptions::default()).unwrap();
            worst = worst.max((sol.x_star[0] - soft_threshold(y, t).unwrap()).abs());
        }
    }
    let elapsed = start.elapsed();
    let passed = worst <= 1e-8 && elapsed.as_secs_f64() < 5.0;
    report(
        1,
        "scalar solver oracle",
        passed,
        elapsed,
        &format!("max |x* - soft| = {worst:.2e} over 2010 points"),
    );
    assert!(passed);
}

fn random_matrix(rng: &mut impl Rng, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal))
}

#[test]
fn criterion_02_gap_identity_on_random_problems() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=6);
        let p = rng.random_range(1..=6);
        let a = random_matrix(&mut rng, n, p);
        let y = DVector::from_fn(n, |_, _| 2.0 * rng.sample::<f64, _>(StandardNormal));
        let t = rng.random_range(0.1..3.0);
        let problem = Problem::new(a, y, t).unwrap();
        let sol = solve(&problem, &SolverOptions::default()).unwrap();
        let x: Vec<f64> = (0..p).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let lhs = problem.objective(&x).unwrap() - sol.m;
        let gap = objective_gap(&problem, &sol, &x).unwrap();
        worst = worst.max((lhs - gap).abs() / lhs.abs().max(f64::MIN_POSITIVE));
    }
    let elapsed = start.elapsed();
    let passed = worst <= 1e-8 && elapsed.as_secs_f64() < 30.0;
    report(
        2,
        "objective gap identity",
        passed,
        elapsed,
        &format!("max relative deviation {worst:.2e} over 1000 problems"),
    );
    assert!(passed);
}

#[test]
fn criterion_03_moment_oracles_match_asymptotics() {
    let start = Instant::now();
    let temp = 1e-4;
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    for k in 1..=9 {
        let u = k as f64 / 10.0;
        let ratio = brute_force_gibbs_1d(u, 1.0, temp, 1).unwrap() / temp;
        let rel = ratio / m1(u).unwrap() - 1.0;
        worst = worst.max(rel.abs());
        if rel.abs() > 0.01 {
            failures.push(format!("u={u}: E[X]/T off by {:+.2}%", 100.0 * rel));
        }
    }
    for t in [0.5, 1.0, 2.0] {
        let ratio = gibbs_centered_moment_1d(2.0 * t, t, temp, 2).unwrap() / temp;
        let rel = ratio / t - 1.0;
        worst = worst.max(rel.abs());
        if rel.abs() > 0.01 {
            failures.push(format!("y=2t, t={t}: variance/T off by {:+.2}%", 100.0 * rel));
        }
    }
    let elapsed = start.elapsed();
    let passed = failures.is_empty() && elapsed.as_secs_f64() < 10.0;
    let detail = if failures.is_empty() {
        format!("max relative deviation {:.3}%", 100.0 * worst)
    } else {
        failures.join("; ")
    };
    report(3, "quadrature moments vs limit moments", passed, elapsed, &detail);
    assert!(passed, "{detail}");
}

/// Reference `(f1, f2)` per proposal variance `1, 9, 16`.
const REFERENCE: [(CriterionRegime, [(f64, f64); 3]); 3] = [
    (
        CriterionRegime::Interior,
        [(0.0351, 0.0615), (0.0373, 0.0605), (0.0394, 0.0604)],
    ),
    (
        CriterionRegime::Boundary,
        [(0.0326, 0.0102), (0.0338, 0.0155), (0.0378, 0.0188)],
    ),
    (
        CriterionRegime::Exterior,
        [(0.1388, 0.0204), (0.1397, 0.0222), (0.1419, 0.0233)],
    ),
];

#[test]
fn criterion_04_proposal_ranking_tables() {
    let start = Instant::now();
    let family = ProposalFamily::new(TABLE_VARIANCES.to_vec()).unwrap();
    let seeds = 0..5u64;
    let mut rank_ok = true;
    let mut lines = Vec::new();
    let mut off = Vec::new();
    for (regime, reference_rows) in REFERENCE {
        let mut wins = 0;
        let mut sums = [(0.0, 0.0); 3];
        for seed in seeds.clone() {
            let params = CriterionParams::table_defaults(seed);
            let rep = rank_proposals(&family, regime, &params, &MhSampler::default()).unwrap();
            if rep.best_sigma2 == 1.0 {
                wins += 1;
            }
            for (acc, row) in sums.iter_mut().zip(&rep.rows) {
                acc.0 += row.f1;
                acc.1 += row.f2;
            }
        }
        rank_ok &= wins >= 4;
        lines.push(format!("{}: sigma2=1 best in {wins}/5", regime.name()));
        for ((sum, reference), sigma2) in sums.iter().zip(reference_rows).zip(TABLE_VARIANCES) {
            let mean = (sum.0 / 5.0, sum.1 / 5.0);
            for (name, ours, theirs) in [("f1", mean.0, reference.0), ("f2", mean.1, reference.1)] {
                if (ours / theirs - 1.0).abs() > 0.5 {
                    off.push(format!(
                        "{} {name}(sigma2={sigma2}) = {ours:.4} vs {theirs}",
                        regime.name()
                    ));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let passed = rank_ok && off.is_empty() && elapsed.as_secs_f64() < 600.0;
    let mut detail = lines.join(", ");
    if !off.is_empty() {
        detail.push_str(&format!("; outside +-50%: {}", off.join(", ")));
    }
    report(4, "proposal ranking and reference values", passed, elapsed, &detail);
    assert!(rank_ok, "{detail}");
    assert!(off.is_empty(), "{detail}");
}

#[test]
fn criterion_05_running_averages_at_target_temperature() {
    let start = Instant::now();
    let (rep, _) = run_table4_mh(&Table4Params::default()).unwrap();
    let last = rep.rows.iter().find(|r| r.n == 8000).unwrap();
    let elapsed = start.elapsed();
    let passed = (last.bias_n - 0.01).abs() <= 0.005
        && (last.mse_n - 3.5e-4).abs() <= 2.5e-4
        && (rep.temperature - 0.0075).abs() < 1e-4
        && elapsed.as_secs_f64() < 30.0;
    let detail = format!(
        "T = {:.5}, b_N = {:.5}, MSE_N = {:.3e} at N = 8000",
        rep.temperature, last.bias_n, last.mse_n
    );
    report(
        5,
        "bias and mean square at derived temperature",
        passed,
        elapsed,
        &detail,
    );
    assert!(passed, "{detail}");
}

#[test]
fn criterion_06_boundary_negative_mass_decreases() {
    let start = Instant::now();
    let rows = boundary_sign_sweep(1.0, &[1.0, 0.1, 0.01], 100_000, 0).unwrap();
    let decreasing = rows.windows(2).all(|w| w[1].frequency < w[0].frequency);
    let within = rows
        .iter()
        .all(|r| (r.frequency - r.exact).abs() <= 3.0 * r.standard_error);
    let elapsed = start.elapsed();
    let passed = decreasing && within && elapsed.as_secs_f64() < 60.0;
    let detail = rows
        .iter()
        .map(|r| {
            format!(
                "T={}: {:.4} (exact {:.4}, se {:.4})",
                r.temperature, r.frequency, r.exact, r.standard_error
            )
        })
        .collect::<Vec<_>>()
        .join(", ");
    report(6, "boundary sign frequency trend", passed, elapsed, &detail);
    assert!(passed, "{detail}");
}

#[test]
fn criterion_07_scaling_limit_ks() {
    let start = Instant::now();
    let mut details = Vec::new();
    let mut passed = true;
    for (name, y) in [("interior", 0.5), ("boundary", 1.0), ("exterior", 2.0)] {
        let rows = verify_scaling_1d(y, 1.0, &[1e-3], 10_000, 0, &ThinningOptions::default()).unwrap();
        passed &= rows[0].ks < 0.03;
        details.push(format!("{name} KS = {:.4}", rows[0].ks));
    }
    let elapsed = start.elapsed();
    passed &= elapsed.as_secs_f64() < 120.0;
    let detail = details.join(", ");
    report(7, "rescaled scalar laws", passed, elapsed, &detail);
    assert!(passed, "{detail}");
}

#[test]
fn criterion_08_two_dimensional_chi_square() {
    let start = Instant::now();
    // Orthogonal columns: coordinate 0 in the support, coordinate 1 an interior zero.
    let a = DMatrix::from_row_slice(2, 2, &[1.0, -0.3, 0.3, 1.0]);
    let problem = Problem::new(a, DVector::from_vec(vec![2.0, 0.3]), 0.5).unwrap();
    let sol = solve(&problem, &SolverOptions::default()).unwrap();
    assert!(sol.unique);
    assert_eq!(sol.support_s(), &[0]);
    assert_eq!(sol.zero_set_i0(), &[1]);
    let r = limit_chi_square(
        &problem,
        1e-3,
        &ChiSquareOptions::default(),
        &ThinningOptions::default(),
    )
    .unwrap();
    let elapsed = start.elapsed();
    let passed = r.passed && elapsed.as_secs_f64() < 120.0;
    let detail = format!(
        "chi2 = {:.2} on {} df, 1% critical value {:.2}, {} samples thinned by {}",
        r.statistic, r.degrees_of_freedom, r.critical_value, r.samples, r.thinning
    );
    report(8, "histogram vs limit density in 2D", passed, elapsed, &detail);
    assert!(passed, "{detail}");
}

#[test]
fn criterion_09_annealing_budget() {
    let start = Instant::now();
    let n = sa_iterations(1.0, 0.0075, 1.001).unwrap();
    let csv = emit_figure_data(4, &FigureParams::defaults(4)).unwrap();
    let mut monotone = true;
    for name in csv.header.iter().filter(|h| h.starts_with("N_SA")) {
        let col = csv.float_column(name).unwrap();
        monotone &= col.windows(2).all(|w| w[1] <= w[0]) && col.first() > col.last();
    }
    let elapsed = start.elapsed();
    let passed = n == 4896 && monotone;
    let detail = format!("N(1, 0.0075, 1.001) = {n}, budget curves monotone: {monotone}");
    report(9, "annealing budget formula", passed, elapsed, &detail);
    assert!(passed, "{detail}");
}

#[test]
fn criterion_10_interior_temperature_consistency() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    let mut iff = true;
    for _ in 0..100 {
        let b = rng.random_range(1e-4..1.0);
        let u = rng.random_range(0.01..0.99);
        let ratio = m1(u).unwrap().powi(2) / m2(u).unwrap();
        assert!((ratio / interior_constraint(u).unwrap() - 1.0).abs() < 1e-14);
        let mse = b * b / ratio;
        let tb = temp_from_bias_interior(b, u).unwrap();
        let tm = temp_from_mse_interior(mse, u).unwrap();
        worst = worst.max((tb - tm).abs() / tb);
        let target = |mse| TemperatureTarget {
            bias: Some(b),
            mse,
            regime: Regime::Interior { u },
        };
        iff &= consistent_temperature(&target(mse), 1e-12).is_ok();
        let off = mse * 1.001;
        iff &= (temp_from_mse_interior(off, u).unwrap() / tb - 1.0).abs() > 1e-6;
        iff &= consistent_temperature(&target(off), 1e-12).is_err();
    }
    let elapsed = start.elapsed();
    let passed = worst <= 1e-12 && iff;
    let detail = format!("max relative gap {worst:.2e}, perturbed targets rejected: {iff}");
    report(10, "interior temperature consistency", passed, elapsed, &detail);
    assert!(passed, "{detail}");
}
