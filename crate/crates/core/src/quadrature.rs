//! Globally adaptive Simpson quadrature.
//!
//! Intervals live in a max-heap keyed by their error estimate; the worst one
//! is bisected until the summed estimate drops below
//! `rel_tol * Σ|S_i| + abs_tol`. Using `Σ|S_i|` as the scale keeps the
//! criterion meaningful for integrands that cancel (odd moments).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
    /// Equal pieces each breakpoint interval is cut into before adapting.
    pub initial_pieces: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 0.0,
            max_intervals: 400_000,
            initial_pieces: 8,
        }
    }
}

struct Piece {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    refined: f64,
    fl: f64,
    fr: f64,
}

impl Piece {
    fn new(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> Self {
        let m = 0.5 * (a + b);
        let fl = f(0.5 * (a + m));
        let fr = f(0.5 * (m + b));
        let h = b - a;
        let whole = h / 6.0 * (fa + 4.0 * fm + fb);
        let refined = h / 12.0 * (fa + 4.0 * fl + 2.0 * fm + 4.0 * fr + fb);
        Self {
            a,
            b,
            fa,
            fm,
            fb,
            whole,
            refined,
            fl,
            fr,
        }
    }

    fn error(&self) -> f64 {
        (self.refined - self.whole).abs() / 15.0
    }

    fn estimate(&self) -> f64 {
        // Richardson-extrapolated composite Simpson.
        self.refined + (self.refined - self.whole) / 15.0
    }

    fn split(self, f: &impl Fn(f64) -> f64) -> (Piece, Piece) {
        let m = 0.5 * (self.a + self.b);
        (
            Piece::new(f, self.a, m, self.fa, self.fl, self.fm),
            Piece::new(f, m, self.b, self.fm, self.fr, self.fb),
        )
    }
}

struct Keyed(Piece);

impl PartialEq for Keyed {
    fn eq(&self, other: &Self) -> bool {
        self.0.error() == other.0.error()
    }
}
impl Eq for Keyed {}
impl PartialOrd for Keyed {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Keyed {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.error().total_cmp(&other.0.error())
    }
}

/// Integrate `f` over `[points[0], points[last]]`. Interior points are
/// breakpoints (kinks, discontinuities, peaks) that are never straddled.
pub fn integrate(f: impl Fn(f64) -> f64, points: &[f64], opts: &QuadratureOptions) -> Result<f64> {
    let mut pts: Vec<f64> = points.to_vec();
    if pts.len() < 2 || pts.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("quadrature needs at least two finite points"));
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();

    let mut heap = BinaryHeap::new();
    let pieces = opts.initial_pieces.max(1);
    for w in pts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let h = (hi - lo) / pieces as f64;
        for k in 0..pieces {
            let a = lo + h * k as f64;
            let b = if k + 1 == pieces { hi } else { a + h };
            let piece = Piece::new(&f, a, b, f(a), f(0.5 * (a + b)), f(b));
            heap.push(Keyed(piece));
        }
    }

    loop {
        let (mut total_err, mut scale) = (0.0, 0.0);
        for Keyed(p) in heap.iter() {
            total_err += p.error();
            scale += p.refined.abs();
        }
        if !total_err.is_finite() || !scale.is_finite() {
            return Err(Error::Quadrature {
                estimated_error: total_err,
                evaluations: heap.len(),
            });
        }
        if total_err <= opts.rel_tol * scale + opts.abs_tol {
            return Ok(heap.iter().map(|Keyed(p)| p.estimate()).sum());
        }
        if heap.len() >= opts.max_intervals {
            return Err(Error::Quadrature {
                estimated_error: total_err,
                evaluations: heap.len(),
            });
        }
        // Refine a batch of the worst intervals before re-summing.
        let batch = (heap.len() / 8).max(1);
        for _ in 0..batch {
            let Some(Keyed(worst)) = heap.pop() else { break };
            if worst.b - worst.a <= f64::EPSILON * worst.a.abs().max(worst.b.abs()) {
                return Err(Error::Quadrature {
                    estimated_error: total_err,
                    evaluations: heap.len(),
                });
            }
            let (l, r) = worst.split(&f);
            heap.push(Keyed(l));
            heap.push(Keyed(r));
        }
    }
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pprev = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pprev) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}
