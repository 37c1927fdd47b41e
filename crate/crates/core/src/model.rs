//! The penalized least-squares problem and its objective
//! `F(x) = ||x||_1 + ||Ax - y||^2 / (2t)`.

use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::solver::PlseSolution;

/// Measurement matrix `A` (n×p), data `y` (n) and smoothing parameter `t > 0`.
///
/// Immutable once built; share freely across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    matrix_a: DMatrix<f64>,
    data_y: DVector<f64>,
    smoothing_t: f64,
}

impl Problem {
    pub fn new(matrix_a: DMatrix<f64>, data_y: DVector<f64>, smoothing_t: f64) -> Result<Self> {
        let (n, p) = matrix_a.shape();
        if n == 0 || p == 0 {
            return Err(Error::invalid("matrix A must be at least 1x1"));
        }
        if data_y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: data_y.len(),
            });
        }
        if !(smoothing_t > 0.0) || !smoothing_t.is_finite() {
            return Err(Error::invalid(format!(
                "smoothing parameter t must be positive, got {smoothing_t}"
            )));
        }
        if matrix_a.iter().chain(data_y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("A and y must be finite"));
        }
        if matrix_a.iter().all(|&v| v == 0.0) {
            return Err(Error::invalid("A must have at least one nonzero column"));
        }
        Ok(Self {
            matrix_a,
            data_y,
            smoothing_t,
        })
    }

    /// The one-dimensional problem `A = [1]`.
    pub fn scalar(y: f64, t: f64) -> Result<Self> {
        Self::new(DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, y), t)
    }

    pub fn matrix_a(&self) -> &DMatrix<f64> {
        &self.matrix_a
    }

    pub fn data_y(&self) -> &DVector<f64> {
        &self.data_y
    }

    pub fn smoothing_t(&self) -> f64 {
        self.smoothing_t
    }

    pub fn n(&self) -> usize {
        self.matrix_a.nrows()
    }

    pub fn p(&self) -> usize {
        self.matrix_a.ncols()
    }

    pub(crate) fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `Ax - y`.
    pub fn residual(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_dim(x)?;
        Ok(self.residual_unchecked(x))
    }

    pub(crate) fn residual_unchecked(&self, x: &[f64]) -> DVector<f64> {
        let mut r = -self.data_y.clone();
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                r.axpy(xj, &self.matrix_a.column(j), 1.0);
            }
        }
        r
    }

    /// `F(x, y, t)`.
    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.objective_unchecked(x))
    }

    /// Allocation-free; this sits in the inner loop of every sampler.
    pub(crate) fn objective_unchecked(&self, x: &[f64]) -> f64 {
        let l1: f64 = x.iter().map(|v| v.abs()).sum();
        let a = &self.matrix_a;
        let mut sq = 0.0;
        for i in 0..a.nrows() {
            let mut r = -self.data_y[i];
            for (j, &xj) in x.iter().enumerate() {
                r += a[(i, j)] * xj;
            }
            sq += r * r;
        }
        l1 + sq / (2.0 * self.smoothing_t)
    }

    /// Load a problem from its plain-text form (see [`Problem::from_str`]).
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        std::fs::read_to_string(path)?.parse()
    }

    /// Plain-text form accepted by [`Problem::from_str`].
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.n(), self.p(), self.smoothing_t);
        for row in self.matrix_a.row_iter() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        let cells: Vec<String> = self.data_y.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
        out
    }
}

/// Parses `"n p t"`, then n rows of p entries of A, then one row of n entries of y.
/// Blank lines are ignored.
impl FromStr for Problem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut lines = s
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());

        let parse_row = |line: usize, text: &str, want: usize| -> Result<Vec<f64>> {
            let vals = text
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>().map_err(|e| Error::Parse {
                        line,
                        message: format!("{tok:?}: {e}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != want {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {want} entries, found {}", vals.len()),
                });
            }
            Ok(vals)
        };

        let (line, header) = lines.next().ok_or(Error::Parse {
            line: 0,
            message: "empty input".into(),
        })?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(Error::Parse {
                line,
                message: "header must be \"n p t\"".into(),
            });
        }
        let bad = |m: String| Error::Parse { line, message: m };
        let n: usize = toks[0].parse().map_err(|e| bad(format!("n: {e}")))?;
        let p: usize = toks[1].parse().map_err(|e| bad(format!("p: {e}")))?;
        let t: f64 = toks[2].parse().map_err(|e| bad(format!("t: {e}")))?;

        let mut entries = Vec::with_capacity(n * p);
        for _ in 0..n {
            let (line, text) = lines.next().ok_or(Error::Parse {
                line: 0,
                message: "missing rows of A".into(),
            })?;
            entries.extend(parse_row(line, text, p)?);
        }
        let (line, text) = lines.next().ok_or(Error::Parse {
            line: 0,
            message: "missing data vector y".into(),
        })?;
        let y = parse_row(line, text, n)?;
        if let Some((line, _)) = lines.next() {
            return Err(Error::Parse {
                line,
                message: "trailing content".into(),
            });
        }
        Problem::new(DMatrix::from_row_slice(n, p, &entries), DVector::from_vec(y), t)
    }
}

/// `F(x) - m` written around a minimizer:
/// `Σ |x_i| (1 - sgn(x_i) ξ_i) + ||A(x - x*)||^2 / (2t)`.
///
/// Uses the certificate ξ stored in `solution`; sgn is never evaluated at 0
/// because `|x_i|(1 - sgn(x_i) ξ_i) = |x_i| - x_i ξ_i`.
pub fn objective_gap(problem: &Problem, solution: &PlseSolution, x: &[f64]) -> Result<f64> {
    problem.check_dim(x)?;
    if solution.x_star.len() != problem.p() {
        return Err(Error::DimensionMismatch {
            expected: problem.p(),
            got: solution.x_star.len(),
        });
    }
    let penalty: f64 = x
        .iter()
        .zip(&solution.xi)
        .map(|(&xi_coord, &cert)| xi_coord.abs() - xi_coord * cert)
        .sum();
    let diff: Vec<f64> = x.iter().zip(&solution.x_star).map(|(a, b)| a - b).collect();
    let mut ad = DVector::zeros(problem.n());
    for (j, &d) in diff.iter().enumerate() {
        ad.axpy(d, &problem.matrix_a().column(j), 1.0);
    }
    Ok(penalty + ad.norm_squared() / (2.0 * problem.smoothing_t()))
}

/// The one-dimensional minimizer `soft(y, t) = sign(y) max(|y| - t, 0)`.
pub fn soft_threshold(y: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::invalid(format!("threshold must be positive, got {t}")));
    }
    Ok(soft_threshold_unchecked(y, t))
}

pub(crate) fn soft_threshold_unchecked(y: f64, t: f64) -> f64 {
    if y > t {
        y - t
    } else if y < -t {
        y + t
    } else {
        0.0
    }
}
