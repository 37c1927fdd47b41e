//! FISTA for the ℓ1-penalized least-squares problem, together with the dual
//! certificate `ξ = Aᵀ(y - Ax*)/t`, the support partition and the Gram-matrix
//! uniqueness check.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{soft_threshold_unchecked, Problem};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Stop once the composite gradient mapping has at most this Euclidean norm.
    pub gradient_tolerance: f64,
    /// `|x*_i| <= support_tolerance` counts as zero.
    pub support_tolerance: f64,
    /// `|ξ_i| >= 1 - certificate_tolerance` counts as saturated.
    pub certificate_tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100_000,
            gradient_tolerance: 1e-10,
            support_tolerance: 1e-7,
            certificate_tolerance: 1e-6,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        let all_positive = self.max_iterations > 0
            && self.gradient_tolerance > 0.0
            && self.support_tolerance > 0.0
            && self.certificate_tolerance > 0.0;
        if !all_positive {
            return Err(Error::invalid("solver options must all be positive"));
        }
        Ok(())
    }
}

/// Index sets of a minimizer: support `S`, zero set `I0`, and the saturated
/// part `∂I0 ⊆ I0` where `|ξ_i| = 1`. Indices are 0-based and sorted.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SupportPartition {
    pub support_s: Vec<usize>,
    pub zero_set_i0: Vec<usize>,
    pub boundary_set: Vec<usize>,
}

impl SupportPartition {
    /// `I0 \ ∂I0`, the coordinates that scale like `T`.
    pub fn interior_zeros(&self) -> Vec<usize> {
        self.zero_set_i0
            .iter()
            .copied()
            .filter(|i| self.boundary_set.binary_search(i).is_err())
            .collect()
    }

    /// `S ∪ ∂I0`, the coordinates that scale like `√T`.
    pub fn support_and_boundary(&self) -> Vec<usize> {
        let mut j: Vec<usize> = self.support_s.iter().chain(&self.boundary_set).copied().collect();
        j.sort_unstable();
        j
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlseSolution {
    pub x_star: Vec<f64>,
    /// Dual certificate `Aᵀ(y - Ax*)/t`.
    pub xi: Vec<f64>,
    /// `F(x*)`.
    pub m: f64,
    pub partition: SupportPartition,
    /// Outcome of [`uniqueness_certificate`]. `false` means "not certified",
    /// never "known to be non-unique".
    pub unique: bool,
    /// The certificate tolerance used to build `∂I0`.
    pub tolerance_used: f64,
    pub iterations: usize,
}

impl PlseSolution {
    pub fn support_s(&self) -> &[usize] {
        &self.partition.support_s
    }

    pub fn zero_set_i0(&self) -> &[usize] {
        &self.partition.zero_set_i0
    }

    pub fn boundary_set(&self) -> &[usize] {
        &self.partition.boundary_set
    }

    pub fn p(&self) -> usize {
        self.x_star.len()
    }
}

/// Solve from the origin.
pub fn solve(problem: &Problem, opts: &SolverOptions) -> Result<PlseSolution> {
    solve_from(problem, opts, &vec![0.0; problem.p()])
}

/// FISTA with step `1/L`, `L = λ_max(AᵀA)/t`, prox = soft threshold at the step
/// size, and gradient-based adaptive restart of the momentum.
pub fn solve_from(problem: &Problem, opts: &SolverOptions, start: &[f64]) -> Result<PlseSolution> {
    opts.validate()?;
    problem.check_dim(start)?;
    let a = problem.matrix_a();
    let t = problem.smoothing_t();
    let gram = a.transpose() * a;
    let aty = a.transpose() * problem.data_y();
    let lipschitz = largest_eigenvalue(&gram) / t;
    let step = 1.0 / lipschitz;

    let grad = |z: &DVector<f64>| (&gram * z - &aty) / t;

    let mut x_prev = DVector::from_column_slice(start);
    let mut z = x_prev.clone();
    let mut theta = 1.0_f64;
    let mut residual = f64::INFINITY;

    for iteration in 1..=opts.max_iterations {
        let forward = &z - grad(&z) * step;
        let x_new = forward.map(|v| soft_threshold_unchecked(v, step));
        residual = (&z - &x_new).norm() / step;
        if residual <= opts.gradient_tolerance {
            return Ok(finish(problem, opts, x_new.as_slice(), iteration));
        }

        let moved = &x_new - &x_prev;
        if (&z - &x_new).dot(&moved) > 0.0 {
            theta = 1.0;
            z = x_new.clone();
        } else {
            let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
            z = &x_new + moved * ((theta - 1.0) / theta_next);
            theta = theta_next;
        }
        x_prev = x_new;
    }

    Err(Error::NotConverged {
        iterations: opts.max_iterations,
        residual,
        last_iterate: x_prev.as_slice().to_vec(),
    })
}

fn finish(problem: &Problem, opts: &SolverOptions, x_star: &[f64], iterations: usize) -> PlseSolution {
    let xi = dual_vector_unchecked(problem, x_star);
    let partition = classify_support_unchecked(x_star, &xi, opts);
    let m = problem.objective_unchecked(x_star);
    let unique = gram_is_invertible(problem, &partition.support_and_boundary());
    PlseSolution {
        x_star: x_star.to_vec(),
        xi,
        m,
        partition,
        unique,
        tolerance_used: opts.certificate_tolerance,
        iterations,
    }
}

/// Power iteration on the symmetric PSD matrix `gram`. Falls back to the
/// Frobenius norm (an upper bound) if the iteration has not settled.
fn largest_eigenvalue(gram: &DMatrix<f64>) -> f64 {
    const MAX_ITER: usize = 500;
    const REL_TOL: f64 = 1e-10;

    let start = (0..gram.ncols())
        .max_by(|&i, &j| gram[(i, i)].total_cmp(&gram[(j, j)]))
        .unwrap_or(0);
    let mut v = DVector::zeros(gram.ncols());
    v[start] = 1.0;
    let mut lambda = 0.0;
    for _ in 0..MAX_ITER {
        let w = gram * &v;
        let next = w.norm();
        if next == 0.0 {
            break;
        }
        v = w / next;
        if (next - lambda).abs() <= REL_TOL * next {
            // Power iteration approaches λ_max from below.
            return next * (1.0 + 1e-9);
        }
        lambda = next;
    }
    gram.norm()
}

/// `Aᵀ(y - Ax)/t`.
pub fn dual_vector(problem: &Problem, x: &[f64]) -> Result<Vec<f64>> {
    problem.check_dim(x)?;
    Ok(dual_vector_unchecked(problem, x))
}

fn dual_vector_unchecked(problem: &Problem, x: &[f64]) -> Vec<f64> {
    let r = problem.residual_unchecked(x);
    let xi = problem.matrix_a().tr_mul(&r) / (-problem.smoothing_t());
    xi.as_slice().to_vec()
}

/// `S = {i: |x*_i| > support_tol}`, `I0` its complement and
/// `∂I0 = {i ∈ I0: |ξ_i| >= 1 - certificate_tol}`.
pub fn classify_support(x_star: &[f64], xi: &[f64], opts: &SolverOptions) -> Result<SupportPartition> {
    if x_star.len() != xi.len() {
        return Err(Error::DimensionMismatch {
            expected: x_star.len(),
            got: xi.len(),
        });
    }
    Ok(classify_support_unchecked(x_star, xi, opts))
}

fn classify_support_unchecked(x_star: &[f64], xi: &[f64], opts: &SolverOptions) -> SupportPartition {
    let mut part = SupportPartition::default();
    for (i, (&x, &c)) in x_star.iter().zip(xi).enumerate() {
        if x.abs() > opts.support_tolerance {
            part.support_s.push(i);
        } else {
            part.zero_set_i0.push(i);
            if c.abs() >= 1.0 - opts.certificate_tolerance {
                part.boundary_set.push(i);
            }
        }
    }
    part
}

/// Sufficient condition for a unique minimizer: the Gram matrix
/// `[⟨Ae_i, Ae_j⟩]_{i,j ∈ S ∪ ∂I0}` is numerically invertible.
pub fn uniqueness_certificate(problem: &Problem, solution: &PlseSolution) -> Result<bool> {
    if solution.p() != problem.p() {
        return Err(Error::DimensionMismatch {
            expected: problem.p(),
            got: solution.p(),
        });
    }
    let cols = solution.partition.support_and_boundary();
    if cols.iter().any(|&c| c >= problem.p()) {
        return Err(Error::Partition("index out of range".into()));
    }
    Ok(gram_is_invertible(problem, &cols))
}

fn gram_is_invertible(problem: &Problem, cols: &[usize]) -> bool {
    if cols.is_empty() {
        return true;
    }
    let sub = problem.matrix_a().select_columns(cols);
    let gram = sub.transpose() * &sub;
    let sv = gram.singular_values();
    let max = sv.max();
    let min = sv.min();
    max > 0.0 && min > problem.p() as f64 * f64::EPSILON * max
}
