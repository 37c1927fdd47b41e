//! Empirical checks of the low-temperature rescaling.
//!
//! Around a certified minimizer `x*` with certificate `ξ`, coordinates in
//! `I0 \ ∂I0` ("fast") shrink like `T`, those in `S ∪ ∂I0` ("slow") like
//! `√T`. Jointly, `(x_i/T)_fast` and `((x_i - x*_i)/√T)_slow` converge to the
//! law with unnormalized density
//!
//! ```text
//! Π_fast exp(-|z_i|(1 - sgn(z_i) ξ_i)) · exp(-||Σ_slow z_j A e_j||²/(2t)) · Π_∂I0 1[sgn(z_i) ξ_i = 1]
//! ```
//!
//! This module rescales chains, evaluates that density, measures sign events
//! on `∂I0`, computes exact scalar Gibbs moments by quadrature, and runs KS
//! and chi-square comparisons against the limits.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::limit::{ks_statistic, LimitLaw1D, Regime};
use crate::model::{soft_threshold_unchecked, Problem};
use crate::quadrature::{gauss_legendre, integrate, QuadratureOptions};
use crate::rng::{derive_seed, Stream};
use crate::sampler::{mh_chain, ChainResult, MhConfig, Proposal};
use crate::solver::{solve, PlseSolution, SolverOptions};
use crate::stats::{autocorrelation, batch_means_se, chi_square_quantile, decorrelation_lag};

/// Coordinates that scale like `T` (`fast = I0 \ ∂I0`) and like `√T`
/// (`slow = S ∪ ∂I0`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoordinateSplit {
    pub fast: Vec<usize>,
    pub slow: Vec<usize>,
}

impl CoordinateSplit {
    pub fn from_solution(solution: &PlseSolution) -> Result<Self> {
        let p = solution.p();
        let part = &solution.partition;
        let mut seen = vec![0u8; p];
        for &i in part.support_s.iter().chain(&part.zero_set_i0) {
            if i >= p {
                return Err(Error::Partition(format!("index {i} out of range for p = {p}")));
            }
            seen[i] += 1;
        }
        if seen.iter().any(|&c| c != 1) {
            return Err(Error::Partition("S and I0 must partition the coordinates".into()));
        }
        if part
            .boundary_set
            .iter()
            .any(|i| part.zero_set_i0.binary_search(i).is_err())
        {
            return Err(Error::Partition("∂I0 must be a subset of I0".into()));
        }
        Ok(Self {
            fast: part.interior_zeros(),
            slow: part.support_and_boundary(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RescaledSample {
    /// `x_i / T` for `i ∈ I0 \ ∂I0`.
    pub fast_coords: Vec<f64>,
    /// `(x_i - x*_i) / √T` for `i ∈ S ∪ ∂I0`.
    pub slow_coords: Vec<f64>,
}

pub fn rescale_samples(chain: &ChainResult, solution: &PlseSolution, temperature: f64) -> Result<Vec<RescaledSample>> {
    if chain.dim() != solution.p() {
        return Err(Error::Partition(format!(
            "chain has dimension {} but the solution has {} coordinates",
            chain.dim(),
            solution.p()
        )));
    }
    if !(temperature > 0.0) {
        return Err(Error::invalid(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let split = CoordinateSplit::from_solution(solution)?;
    let root = temperature.sqrt();
    Ok(chain
        .states()
        .map(|x| RescaledSample {
            fast_coords: split.fast.iter().map(|&i| x[i] / temperature).collect(),
            slow_coords: split.slow.iter().map(|&i| (x[i] - solution.x_star[i]) / root).collect(),
        })
        .collect())
}

/// The unnormalized limit density at rescaled coordinates `(fast, slow)`,
/// ordered as in [`CoordinateSplit`]. A slow coordinate on `∂I0` that is
/// exactly 0 fails its sign indicator.
pub fn limit_density_nd(problem: &Problem, solution: &PlseSolution, fast: &[f64], slow: &[f64]) -> Result<f64> {
    let kernel = LimitKernel::new(problem, solution)?;
    if fast.len() != kernel.split.fast.len() {
        return Err(Error::DimensionMismatch {
            expected: kernel.split.fast.len(),
            got: fast.len(),
        });
    }
    if slow.len() != kernel.split.slow.len() {
        return Err(Error::DimensionMismatch {
            expected: kernel.split.slow.len(),
            got: slow.len(),
        });
    }
    Ok(kernel.eval(fast, slow))
}

struct LimitKernel {
    split: CoordinateSplit,
    fast_xi: Vec<f64>,
    /// Columns `A e_j` for the slow coordinates.
    slow_columns: Vec<Vec<f64>>,
    /// `Some(ξ_j)` for slow coordinates in `∂I0`.
    slow_signs: Vec<Option<f64>>,
    two_t: f64,
    n: usize,
}

impl LimitKernel {
    fn new(problem: &Problem, solution: &PlseSolution) -> Result<Self> {
        if solution.p() != problem.p() {
            return Err(Error::DimensionMismatch {
                expected: problem.p(),
                got: solution.p(),
            });
        }
        if !solution.unique {
            return Err(Error::NotCertified);
        }
        let split = CoordinateSplit::from_solution(solution)?;
        let a = problem.matrix_a();
        Ok(Self {
            fast_xi: split.fast.iter().map(|&i| solution.xi[i]).collect(),
            slow_columns: split
                .slow
                .iter()
                .map(|&j| a.column(j).iter().copied().collect())
                .collect(),
            slow_signs: split
                .slow
                .iter()
                .map(|j| solution.boundary_set().binary_search(j).ok().map(|_| solution.xi[*j]))
                .collect(),
            split,
            two_t: 2.0 * problem.smoothing_t(),
            n: problem.n(),
        })
    }

    fn eval(&self, fast: &[f64], slow: &[f64]) -> f64 {
        for (z, sign) in slow.iter().zip(&self.slow_signs) {
            if let Some(xi) = sign {
                if !(z * xi > 0.0) {
                    return 0.0;
                }
            }
        }
        let mut exponent: f64 = fast.iter().zip(&self.fast_xi).map(|(&z, &xi)| z.abs() - z * xi).sum();
        let mut norm2 = 0.0;
        for r in 0..self.n {
            let v: f64 = slow.iter().zip(&self.slow_columns).map(|(z, col)| z * col[r]).sum();
            norm2 += v * v;
        }
        exponent += norm2 / self.two_t;
        (-exponent).exp()
    }
}

/// A partition `∂I0 = K1 ∪ K2`: the event that `sgn(x_i) ξ_i = -1` on `K1`
/// and `= +1` on `K2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignEvent {
    pub k1: Vec<usize>,
    pub k2: Vec<usize>,
}

impl SignEvent {
    fn validate(&self, solution: &PlseSolution) -> Result<()> {
        let mut all: Vec<usize> = self.k1.iter().chain(&self.k2).copied().collect();
        all.sort_unstable();
        let n = all.len();
        all.dedup();
        if all.len() != n || all != solution.boundary_set() {
            return Err(Error::Partition(format!(
                "K1 = {:?}, K2 = {:?} is not a partition of ∂I0 = {:?}",
                self.k1,
                self.k2,
                solution.boundary_set()
            )));
        }
        Ok(())
    }

    fn holds(&self, x: &[f64], xi: &[f64]) -> bool {
        let s = |i: usize| x[i] * xi[i];
        self.k1.iter().all(|&i| s(i) < 0.0) && self.k2.iter().all(|&i| s(i) > 0.0)
    }
}

/// 1/0 indicator series of the event along the chain.
pub fn sign_event_indicators(chain: &ChainResult, solution: &PlseSolution, event: &SignEvent) -> Result<Vec<f64>> {
    if chain.dim() != solution.p() {
        return Err(Error::Partition("chain and solution dimensions differ".into()));
    }
    event.validate(solution)?;
    Ok(chain
        .states()
        .map(|x| if event.holds(x, &solution.xi) { 1.0 } else { 0.0 })
        .collect())
}

pub fn sign_event_frequency(chain: &ChainResult, solution: &PlseSolution, event: &SignEvent) -> Result<f64> {
    let ind = sign_event_indicators(chain, solution, event)?;
    if ind.is_empty() {
        return Err(Error::DegenerateChain("empty chain".into()));
    }
    Ok(ind.iter().sum::<f64>() / ind.len() as f64)
}

fn check_scalar_args(t: f64, temperature: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("t must be positive, got {t}")));
    }
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::invalid(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    Ok(())
}

/// Integration window and breakpoints for the scalar Gibbs density.
struct ScalarGibbs {
    y: f64,
    t: f64,
    temperature: f64,
    x_star: f64,
    m: f64,
    lo: f64,
    hi: f64,
}

impl ScalarGibbs {
    fn new(y: f64, t: f64, temperature: f64) -> Result<Self> {
        check_scalar_args(t, temperature)?;
        let x_star = soft_threshold_unchecked(y, t);
        let m = x_star.abs() + (x_star - y).powi(2) / (2.0 * t);
        let half = 60.0 * (t * temperature).sqrt() + 60.0 * temperature;
        Ok(Self {
            y,
            t,
            temperature,
            x_star,
            m,
            lo: x_star - half,
            hi: x_star + half,
        })
    }

    /// `exp(-(F(x) - m)/T)`.
    fn weight(&self, x: f64) -> f64 {
        let gap = x.abs() + (x - self.y).powi(2) / (2.0 * self.t) - self.m;
        (-gap.max(0.0) / self.temperature).exp()
    }

    /// Kinks at 0 and `x*`, plus offsets on both the `T` and `√(tT)` scales so
    /// the initial partition resolves peaks much narrower than the window.
    fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut pts = vec![lo, hi];
        let scales = [self.temperature, (self.t * self.temperature).sqrt()];
        for c in [0.0, self.x_star] {
            pts.push(c);
            for s in scales {
                for k in 0..8 {
                    let d = s * f64::from(1u32 << k);
                    pts.extend([c - d, c + d]);
                }
            }
        }
        pts.retain(|&b| b >= lo && b <= hi);
        pts
    }

    fn integrate(&self, h: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<f64> {
        let opts = QuadratureOptions::default();
        integrate(|x| h(x) * self.weight(x), &self.breakpoints(lo, hi), &opts)
    }

    fn expectation(&self, h: impl Fn(f64) -> f64) -> Result<f64> {
        let z = self.integrate(|_| 1.0, self.lo, self.hi)?;
        Ok(self.integrate(h, self.lo, self.hi)? / z)
    }
}

/// `E[h(X_T)]` under the scalar Gibbs law `∝ exp(-(|x| + (x-y)²/(2t))/T)`,
/// by adaptive quadrature on `x* ± (60√(tT) + 60T)`.
pub fn gibbs_expectation_1d(y: f64, t: f64, temperature: f64, h: impl Fn(f64) -> f64) -> Result<f64> {
    ScalarGibbs::new(y, t, temperature)?.expectation(h)
}

/// Raw moment `E[X_T^k]`, `k ∈ {0, 1, 2}`, of the scalar Gibbs law.
pub fn brute_force_gibbs_1d(y: f64, t: f64, temperature: f64, k: u32) -> Result<f64> {
    if k > 2 {
        return Err(Error::invalid(format!("moment order must be 0, 1 or 2, got {k}")));
    }
    let g = ScalarGibbs::new(y, t, temperature)?;
    if k == 0 {
        return Ok(1.0);
    }
    g.expectation(|x| x.powi(k as i32))
}

/// `E[(X_T - soft(y,t))^k]`.
pub fn gibbs_centered_moment_1d(y: f64, t: f64, temperature: f64, k: u32) -> Result<f64> {
    let g = ScalarGibbs::new(y, t, temperature)?;
    let c = g.x_star;
    g.expectation(|x| (x - c).powi(k as i32))
}

/// `P(X_T < 0)` under the scalar Gibbs law.
pub fn gibbs_negative_probability_1d(y: f64, t: f64, temperature: f64) -> Result<f64> {
    let g = ScalarGibbs::new(y, t, temperature)?;
    let z = g.integrate(|_| 1.0, g.lo, g.hi)?;
    if g.lo >= 0.0 {
        return Ok(0.0);
    }
    Ok(g.integrate(|_| 1.0, g.lo, g.hi.min(0.0))? / z)
}

/// How chains used for distributional tests are thinned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThinningOptions {
    pub pilot_length: usize,
    /// The thinned series must have lag-1 autocorrelation below this.
    pub autocorrelation_threshold: f64,
    pub max_thinning: usize,
    /// Burn-in of the kept chain, in units of the thinning factor.
    pub burn_in_factor: usize,
}

impl Default for ThinningOptions {
    fn default() -> Self {
        Self {
            pilot_length: 20_000,
            autocorrelation_threshold: 0.02,
            max_thinning: 2_000,
            burn_in_factor: 20,
        }
    }
}

/// A thinned chain and the factor used.
#[derive(Debug, Clone)]
pub struct ThinnedChain {
    pub chain: ChainResult,
    pub thinning: usize,
    /// Largest lag-1 autocorrelation over the coordinates of the kept series.
    pub lag1_autocorrelation: f64,
}

/// Runs a pilot chain to pick the thinning factor, then a chain that keeps
/// `n_samples` states spaced by that factor. Both start at `x0`.
pub fn thinned_chain(
    problem: &Problem,
    temperature: f64,
    proposal: Proposal,
    x0: &[f64],
    n_samples: usize,
    seed: u64,
    opts: &ThinningOptions,
) -> Result<ThinnedChain> {
    if n_samples == 0 {
        return Err(Error::invalid("number of samples must be positive"));
    }
    let pilot_cfg = MhConfig::new(
        temperature,
        proposal.sigma2,
        opts.pilot_length,
        derive_seed(seed, Stream::Pilot, 0),
    )
    .with_proposal(proposal.clone())
    .with_initial_state(x0.to_vec());
    let pilot = mh_chain(problem, &pilot_cfg)?;
    let thinning = (0..problem.p())
        .map(|i| decorrelation_lag(&pilot.coordinate(i), opts.autocorrelation_threshold, opts.max_thinning))
        .max()
        .unwrap_or(1);
    let burn_in = opts.burn_in_factor * thinning;
    let cfg = MhConfig::new(
        temperature,
        proposal.sigma2,
        burn_in + n_samples * thinning,
        derive_seed(seed, Stream::Chain, 0),
    )
    .with_proposal(proposal)
    .with_burn_in(burn_in)
    .with_thinning(thinning)
    .with_initial_state(x0.to_vec());
    let chain = mh_chain(problem, &cfg)?;
    let lag1 = (0..problem.p())
        .map(|i| autocorrelation(&chain.coordinate(i), 1))
        .fold(f64::NEG_INFINITY, f64::max);
    // Allow for the sampling noise of the estimate, about 1/√n.
    if lag1 >= opts.autocorrelation_threshold + 3.0 / (n_samples as f64).sqrt() {
        log::warn!(
            "thinned chain at T = {temperature:e} still has lag-1 autocorrelation {lag1:.3} (thinning {thinning})"
        );
    }
    Ok(ThinnedChain {
        chain,
        thinning,
        lag1_autocorrelation: lag1,
    })
}

/// One temperature of a scalar scaling sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub temperature: f64,
    pub regime: Regime,
    /// KS distance of the rescaled sample to the regime's limit law (the
    /// positive branch on the boundary).
    pub ks: f64,
    /// Fraction of kept states on the opposite side of 0 from `y`.
    pub negative_fraction: f64,
    pub samples: usize,
    pub thinning: usize,
    pub lag1_autocorrelation: f64,
    pub acceptance_rate: f64,
}

/// Random-walk standard deviation matched to the width of the scalar Gibbs
/// law in each regime.
pub fn scalar_proposal_sd(y: f64, t: f64, temperature: f64) -> Result<f64> {
    check_scalar_args(t, temperature)?;
    let (law, _) = LimitLaw1D::for_data(y, t)?;
    let gaussian = (t * temperature).sqrt();
    let width = match law.regime() {
        Regime::Interior { .. } => {
            let sd = (law.second_moment() - law.mean().powi(2)).sqrt();
            (temperature * sd).min(gaussian)
        }
        _ => gaussian,
    };
    Ok(2.4 * width)
}

/// For each temperature, samples the scalar Gibbs law by thinned MH started at
/// `soft(y,t)`, rescales according to the regime of `(y, t)` and measures the
/// KS distance to the limit law. Rows follow the order of `temperatures`,
/// which must be strictly decreasing.
pub fn verify_scaling_1d(
    y: f64,
    t: f64,
    temperatures: &[f64],
    n_samples: usize,
    seed: u64,
    opts: &ThinningOptions,
) -> Result<Vec<ScalingRow>> {
    if temperatures.is_empty() {
        return Err(Error::invalid("no temperatures given"));
    }
    if temperatures.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::invalid("temperatures must be strictly decreasing"));
    }
    let problem = Problem::scalar(y, t)?;
    let (law, orientation) = LimitLaw1D::for_data(y, t)?;
    let x_star = soft_threshold_unchecked(y, t);
    temperatures
        .par_iter()
        .enumerate()
        .map(|(idx, &temp)| {
            let sd = scalar_proposal_sd(y, t, temp)?;
            let run = thinned_chain(
                &problem,
                temp,
                Proposal::random_walk(sd * sd),
                &[x_star],
                n_samples,
                derive_seed(seed, Stream::Chain, idx as u64),
                opts,
            )?;
            let xs = run.chain.coordinate(0);
            let oriented: Vec<f64> = xs.iter().map(|x| orientation * x).collect();
            let rescaled: Vec<f64> = match law.regime() {
                Regime::Interior { .. } => oriented.iter().map(|x| x / temp).collect(),
                Regime::Boundary { .. } => oriented.iter().filter(|x| **x > 0.0).map(|x| x / temp.sqrt()).collect(),
                Regime::Exterior { .. } => oriented
                    .iter()
                    .map(|x| (x - orientation * x_star) / temp.sqrt())
                    .collect(),
            };
            if rescaled.is_empty() {
                return Err(Error::DegenerateChain(format!("no positive states at T = {temp:e}")));
            }
            let ks = ks_statistic(&rescaled, |z| law.cdf(z))?;
            let negative = oriented.iter().filter(|x| **x < 0.0).count() as f64 / oriented.len() as f64;
            Ok(ScalingRow {
                temperature: temp,
                regime: law.regime(),
                ks,
                negative_fraction: negative,
                samples: xs.len(),
                thinning: run.thinning,
                lag1_autocorrelation: run.lag1_autocorrelation,
                acceptance_rate: run.chain.acceptance_rate(),
            })
        })
        .collect()
}

/// `P(X_T < 0)` at `y = t` estimated from one unthinned chain, with a
/// batch-means standard error and the quadrature value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignRow {
    pub temperature: f64,
    pub frequency: f64,
    pub standard_error: f64,
    pub exact: f64,
}

pub fn boundary_sign_sweep(t: f64, temperatures: &[f64], chain_length: usize, seed: u64) -> Result<Vec<SignRow>> {
    let problem = Problem::scalar(t, t)?;
    let solution = solve(&problem, &SolverOptions::default())?;
    let event = SignEvent {
        k1: solution.boundary_set().to_vec(),
        k2: vec![],
    };
    if event.k1.is_empty() {
        return Err(Error::Partition("y = t should put the coordinate in ∂I0".into()));
    }
    temperatures
        .par_iter()
        .enumerate()
        .map(|(idx, &temp)| {
            let sd = scalar_proposal_sd(t, t, temp)?;
            let cfg = MhConfig::new(
                temp,
                sd * sd,
                chain_length,
                derive_seed(seed, Stream::Chain, idx as u64),
            )
            .with_initial_state(solution.x_star.clone());
            let chain = mh_chain(&problem, &cfg)?;
            let ind = sign_event_indicators(&chain, &solution, &event)?;
            let frequency = ind.iter().sum::<f64>() / ind.len() as f64;
            Ok(SignRow {
                temperature: temp,
                frequency,
                standard_error: batch_means_se(&ind, 50),
                exact: gibbs_negative_probability_1d(t, t, temp)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareOptions {
    pub bins_per_axis: usize,
    pub n_samples: usize,
    /// Thinned samples of an independent chain used to place the bin edges.
    pub edge_samples: usize,
    pub level: f64,
    /// Cells expected to hold fewer samples are pooled into one.
    pub min_expected: f64,
    pub seed: u64,
}

impl Default for ChiSquareOptions {
    fn default() -> Self {
        Self {
            bins_per_axis: 6,
            n_samples: 10_000,
            edge_samples: 4_000,
            level: 0.01,
            min_expected: 5.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChiSquareReport {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub critical_value: f64,
    pub passed: bool,
    pub samples: usize,
    pub thinning: usize,
}

/// Per-axis quadrature nodes of one bin.
struct AxisBin {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

fn composite_rule(lo: f64, hi: f64, panels: usize, gl: &(Vec<f64>, Vec<f64>)) -> AxisBin {
    let mut nodes = Vec::with_capacity(panels * gl.0.len());
    let mut weights = Vec::with_capacity(panels * gl.0.len());
    let h = (hi - lo) / panels as f64;
    for k in 0..panels {
        let (a, b) = (lo + h * k as f64, lo + h * (k + 1) as f64);
        for (x, w) in gl.0.iter().zip(&gl.1) {
            nodes.push(0.5 * (a + b) + 0.5 * (b - a) * x);
            weights.push(0.5 * (b - a) * w);
        }
    }
    AxisBin { nodes, weights }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[i]
    }
}

fn bin_index(edges: &[f64], z: f64) -> usize {
    edges.partition_point(|e| *e <= z)
}

/// Chi-square goodness of fit between a thinned MH sample at temperature `T`,
/// rescaled, and the normalized limit density, on a grid of quantile bins.
/// Supports `p <= 3`.
pub fn limit_chi_square(
    problem: &Problem,
    temperature: f64,
    opts: &ChiSquareOptions,
    thinning: &ThinningOptions,
) -> Result<ChiSquareReport> {
    let p = problem.p();
    if p > 3 {
        return Err(Error::invalid(format!("grid chi-square test supports p <= 3, got {p}")));
    }
    if opts.bins_per_axis < 2 {
        return Err(Error::invalid("need at least two bins per axis"));
    }
    let solution = solve(problem, &SolverOptions::default())?;
    let kernel = LimitKernel::new(problem, &solution)?;
    let split = &kernel.split;
    let t = problem.smoothing_t();
    let a = problem.matrix_a();

    // Proposal widths follow the scale of each coordinate.
    let scales: Vec<f64> = (0..p)
        .map(|i| {
            let width = if split.fast.contains(&i) {
                temperature / (1.0 - solution.xi[i].abs())
            } else {
                (t * temperature).sqrt() / a.column(i).norm()
            };
            2.4 / (p as f64).sqrt() * width
        })
        .collect();
    let proposal = Proposal {
        kind: Default::default(),
        sigma2: 1.0,
        coordinate_scales: Some(scales),
    };
    let edge_run = thinned_chain(
        problem,
        temperature,
        proposal.clone(),
        &solution.x_star,
        opts.edge_samples,
        derive_seed(opts.seed, Stream::Pilot, 1),
        thinning,
    )?;
    let run = thinned_chain(
        problem,
        temperature,
        proposal,
        &solution.x_star,
        opts.n_samples,
        derive_seed(opts.seed, Stream::Chain, 1),
        thinning,
    )?;
    let to_axes = |r: &RescaledSample| -> Vec<f64> { r.fast_coords.iter().chain(&r.slow_coords).copied().collect() };
    let edge_pts: Vec<Vec<f64>> = rescale_samples(&edge_run.chain, &solution, temperature)?
        .iter()
        .map(to_axes)
        .collect();
    let pts: Vec<Vec<f64>> = rescale_samples(&run.chain, &solution, temperature)?
        .iter()
        .map(to_axes)
        .collect();

    // Axis k < |fast| is fast coordinate split.fast[k]; the rest are slow.
    let n_fast = split.fast.len();
    let slow_sub = a.select_columns(&split.slow);
    let s_min = if split.slow.is_empty() {
        1.0
    } else {
        slow_sub.singular_values().min()
    };
    let gl = gauss_legendre(8);
    let mut axis_edges: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut axis_bins: Vec<Vec<AxisBin>> = Vec::with_capacity(p);
    for k in 0..p {
        let mut vals: Vec<f64> = edge_pts.iter().map(|v| v[k]).collect();
        vals.sort_by(f64::total_cmp);
        let mut edges: Vec<f64> = (1..opts.bins_per_axis)
            .map(|j| quantile(&vals, j as f64 / opts.bins_per_axis as f64))
            .collect();
        let (kinked, bound) = if k < n_fast {
            (true, 60.0 / (1.0 - kernel.fast_xi[k].abs()))
        } else {
            let j = k - n_fast;
            (kernel.slow_signs[j].is_some(), 60.0 * t.sqrt() / s_min)
        };
        if kinked {
            edges.push(0.0);
        }
        edges.retain(|e| e.abs() < bound);
        edges.sort_by(f64::total_cmp);
        edges.dedup();
        let mut bounds = vec![-bound];
        bounds.extend(&edges);
        bounds.push(bound);
        let last = bounds.len() - 2;
        let bins = bounds
            .windows(2)
            .enumerate()
            .map(|(b, w)| composite_rule(w[0], w[1], if b == 0 || b == last { 24 } else { 4 }, &gl))
            .collect();
        axis_edges.push(edges);
        axis_bins.push(bins);
    }

    let dims: Vec<usize> = axis_bins.iter().map(Vec::len).collect();
    let n_cells: usize = dims.iter().product();
    let flat = |idx: &[usize]| idx.iter().zip(&dims).fold(0, |acc, (i, d)| acc * d + i);
    let mut mass = vec![0.0; n_cells];
    let mut idx = vec![0usize; p];
    let mut z = vec![0.0; p];
    for cell in 0..n_cells {
        let mut rem = cell;
        for k in (0..p).rev() {
            idx[k] = rem % dims[k];
            rem /= dims[k];
        }
        let bins: Vec<&AxisBin> = (0..p).map(|k| &axis_bins[k][idx[k]]).collect();
        let counts: Vec<usize> = bins.iter().map(|b| b.nodes.len()).collect();
        let total: usize = counts.iter().product();
        let mut acc = 0.0;
        for node in 0..total {
            let mut r = node;
            let mut w = 1.0;
            for k in (0..p).rev() {
                let j = r % counts[k];
                r /= counts[k];
                z[k] = bins[k].nodes[j];
                w *= bins[k].weights[j];
            }
            acc += w * kernel.eval(&z[..n_fast], &z[n_fast..]);
        }
        mass[cell] = acc;
    }
    let z_total: f64 = mass.iter().sum();
    if !(z_total > 0.0) {
        return Err(Error::Quadrature {
            estimated_error: f64::NAN,
            evaluations: n_cells,
        });
    }

    let mut observed = vec![0usize; n_cells];
    for v in &pts {
        let cell: Vec<usize> = (0..p).map(|k| bin_index(&axis_edges[k], v[k])).collect();
        observed[flat(&cell)] += 1;
    }
    let n = pts.len() as f64;
    let (mut stat, mut cells) = (0.0, 0usize);
    let (mut pooled_e, mut pooled_o) = (0.0, 0.0);
    for (m, &o) in mass.iter().zip(&observed) {
        let e = n * m / z_total;
        if e < opts.min_expected {
            pooled_e += e;
            pooled_o += o as f64;
        } else {
            stat += (o as f64 - e).powi(2) / e;
            cells += 1;
        }
    }
    if pooled_e > 0.0 || pooled_o > 0.0 {
        stat += if pooled_e > 0.0 {
            (pooled_o - pooled_e).powi(2) / pooled_e
        } else {
            f64::INFINITY
        };
        cells += 1;
    }
    if cells < 2 {
        return Err(Error::invalid("too few populated cells for a chi-square test"));
    }
    let df = cells - 1;
    let critical = chi_square_quantile(df as f64, 1.0 - opts.level);
    Ok(ChiSquareReport {
        statistic: stat,
        degrees_of_freedom: df,
        critical_value: critical,
        passed: stat <= critical,
        samples: pts.len(),
        thinning: run.thinning,
    })
}
