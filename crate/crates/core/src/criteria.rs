//! Scores for choosing the variance `σ²` of a Gaussian proposal.
//!
//! Each score compares chain averages with the moments of the zero-temperature
//! limit law, across `M` replicate chains:
//!
//! * interior: `y = tU`, `U ~ Beta(1,3)`; `f1 = mean |θ̄ - T m1(U)|`,
//!   `f2 = mean |mean(θ²) - T² m2(U)|`;
//! * boundary: `y = t`; `f1 = |mean(θ | θ > 0) - √(2Tt/π)|`,
//!   `f2 = |mean(θ²) - Tt|`, averaged over the replicates;
//! * exterior: `y ~ Pareto(3, t)`; `f1 = mean |mean(θ - (y - t))|`,
//!   `f2 = mean |mean((θ - (y - t))²) - Tt|`.
//!
//! The design draws `U_i` / `X_i` and the chain seeds depend only on the
//! master seed and the replicate index, so all variances are scored on the
//! same replicates.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::{Rng, RngExt};
use rand_distr::Distribution;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::limit::{m1, m2, LimitLaw1D};
use crate::model::Problem;
use crate::rng::{derive_seed, rng_from_seed, stream_rng, Stream};
use crate::sampler::{mh_chain, MhConfig, Proposal, ProposalKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CriterionRegime {
    Interior,
    Boundary,
    Exterior,
}

impl CriterionRegime {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Interior => "interior",
            Self::Boundary => "boundary",
            Self::Exterior => "exterior",
        }
    }
}

impl FromStr for CriterionRegime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interior" => Ok(Self::Interior),
            "boundary" => Ok(Self::Boundary),
            "exterior" => Ok(Self::Exterior),
            other => Err(Error::invalid(format!("unknown regime {other:?}"))),
        }
    }
}

/// Distribution of the design points `U_i` (interior) or `X_i` (exterior).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DesignDistribution {
    Beta {
        alpha: f64,
        beta: f64,
    },
    /// Density `α scale^α / x^{α+1}` on `[scale, ∞)`.
    Pareto {
        alpha: f64,
        scale: f64,
    },
}

impl DesignDistribution {
    pub fn beta(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::invalid(format!(
                "Beta({alpha}, {beta}) needs positive parameters"
            )));
        }
        Ok(Self::Beta { alpha, beta })
    }

    pub fn pareto(alpha: f64, scale: f64) -> Result<Self> {
        if !(alpha > 0.0 && scale > 0.0) || !alpha.is_finite() || !scale.is_finite() {
            return Err(Error::invalid(format!(
                "Pareto({alpha}, {scale}) needs positive parameters"
            )));
        }
        Ok(Self::Pareto { alpha, scale })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // 1 - v lies in (0, 1], so the inverse CDFs below stay finite.
        let v: f64 = 1.0 - rng.random::<f64>();
        match *self {
            Self::Beta { alpha, beta } if alpha == 1.0 => 1.0 - v.powf(1.0 / beta),
            Self::Beta { alpha, beta } if beta == 1.0 => v.powf(1.0 / alpha),
            Self::Beta { alpha, beta } => rand_distr::Beta::new(alpha, beta)
                .expect("validated parameters")
                .sample(rng),
            Self::Pareto { alpha, scale } => scale * v.powf(-1.0 / alpha),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Beta { alpha, beta } => alpha / (alpha + beta),
            Self::Pareto { alpha, scale } if alpha > 1.0 => alpha * scale / (alpha - 1.0),
            Self::Pareto { .. } => f64::INFINITY,
        }
    }
}

/// The set `F` of proposal variances to rank.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalFamily {
    variances: Vec<f64>,
}

impl ProposalFamily {
    pub fn new(variances: Vec<f64>) -> Result<Self> {
        if variances.is_empty() {
            return Err(Error::invalid("proposal family is empty"));
        }
        if variances.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid("proposal variances must be positive"));
        }
        for (i, a) in variances.iter().enumerate() {
            if variances[..i].contains(a) {
                return Err(Error::invalid(format!("proposal variance {a} is listed twice")));
            }
        }
        Ok(Self { variances })
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }
}

/// Produces the chain `θ⁽¹⁾..θ⁽ᴺ⁾` for the scalar problem `(y, t)`.
pub trait ChainSampler: Sync {
    fn chain(&self, y: f64, t: f64, temperature: f64, sigma2: f64, n: usize, seed: u64) -> Result<Vec<f64>>;
}

/// Metropolis-Hastings started at 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct MhSampler {
    pub burn_in: usize,
    pub kind: ProposalKind,
}

impl ChainSampler for MhSampler {
    fn chain(&self, y: f64, t: f64, temperature: f64, sigma2: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
        let problem = Problem::scalar(y, t)?;
        let proposal = Proposal {
            kind: self.kind,
            sigma2,
            coordinate_scales: None,
        };
        let cfg = MhConfig::new(temperature, sigma2, n + self.burn_in, seed)
            .with_burn_in(self.burn_in)
            .with_proposal(proposal);
        Ok(mh_chain(&problem, &cfg)?.coordinate(0))
    }
}

/// Independent draws from the zero-temperature law, rescaled to temperature
/// `T`. Ignores `σ²`. Scores computed from it only carry Monte Carlo error.
#[derive(Debug, Clone, Copy, Default)]
pub struct LimitLawSampler;

impl ChainSampler for LimitLawSampler {
    fn chain(&self, y: f64, t: f64, temperature: f64, _sigma2: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
        let (law, orientation) = LimitLaw1D::for_data(y, t)?;
        let mut rng = rng_from_seed(seed);
        let centre = orientation * (y.abs() - t).max(0.0);
        let scale = match law.regime() {
            crate::limit::Regime::Interior { .. } => temperature,
            _ => temperature.sqrt(),
        };
        Ok((0..n)
            .map(|_| centre + orientation * scale * law.sample(&mut rng))
            .collect())
    }
}

/// Run settings shared by all criteria.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriterionParams {
    pub t: f64,
    pub temperature: f64,
    pub chain_length: usize,
    pub replicates: usize,
    pub seed: u64,
}

impl CriterionParams {
    /// `t = 1`, `T = 0.1`, `N = 5000`, `M = 600`.
    pub fn table_defaults(seed: u64) -> Self {
        Self {
            t: 1.0,
            temperature: 0.1,
            chain_length: 5000,
            replicates: 600,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.t > 0.0) || !self.t.is_finite() {
            return Err(Error::invalid(format!("t must be positive, got {}", self.t)));
        }
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(Error::invalid(format!("T must be positive, got {}", self.temperature)));
        }
        if self.chain_length == 0 || self.replicates == 0 {
            return Err(Error::invalid("N and M must be positive"));
        }
        Ok(())
    }

    fn chain_seed(&self, i: usize) -> u64 {
        derive_seed(self.seed, Stream::Chain, i as u64)
    }
}

/// Default design of a regime: `Beta(1,3)` for the interior, `Pareto(3,t)`
/// for the exterior, `None` for the boundary (where `y = t`).
pub fn default_design(regime: CriterionRegime, t: f64) -> Option<DesignDistribution> {
    match regime {
        CriterionRegime::Interior => Some(DesignDistribution::Beta { alpha: 1.0, beta: 3.0 }),
        CriterionRegime::Boundary => None,
        CriterionRegime::Exterior => Some(DesignDistribution::Pareto { alpha: 3.0, scale: t }),
    }
}

/// The `M` paired design draws (`U_i` or `X_i`).
pub fn design_points(design: &DesignDistribution, replicates: usize, seed: u64) -> Vec<f64> {
    (0..replicates)
        .map(|i| design.sample(&mut stream_rng(seed, Stream::Design, i as u64)))
        .collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn mean_square(xs: &[f64]) -> f64 {
    xs.iter().map(|v| v * v).sum::<f64>() / xs.len() as f64
}

/// Per-replicate `(f1, f2)` contributions.
fn replicate_scores(
    regime: CriterionRegime,
    design_value: f64,
    params: &CriterionParams,
    sigma2: f64,
    seed: u64,
    sampler: &dyn ChainSampler,
) -> Result<(f64, f64)> {
    let (t, temp, n) = (params.t, params.temperature, params.chain_length);
    match regime {
        CriterionRegime::Interior => {
            let u = design_value;
            let chain = sampler.chain(t * u, t, temp, sigma2, n, seed)?;
            Ok((
                (mean(&chain) - temp * m1(u)?).abs(),
                (mean_square(&chain) - temp * temp * m2(u)?).abs(),
            ))
        }
        CriterionRegime::Boundary => {
            let chain = sampler.chain(t, t, temp, sigma2, n, seed)?;
            let positive: Vec<f64> = chain.iter().copied().filter(|v| *v > 0.0).collect();
            if positive.is_empty() {
                return Err(Error::DegenerateChain(format!(
                    "no positive states in a boundary chain of length {n} (σ² = {sigma2})"
                )));
            }
            Ok((
                (mean(&positive) - (2.0 * temp * t / PI).sqrt()).abs(),
                (mean_square(&chain) - temp * t).abs(),
            ))
        }
        CriterionRegime::Exterior => {
            let y = design_value;
            let chain = sampler.chain(y, t, temp, sigma2, n, seed)?;
            let centred: Vec<f64> = chain.iter().map(|v| v - (y - t)).collect();
            Ok((mean(&centred).abs(), (mean_square(&centred) - temp * t).abs()))
        }
    }
}

/// `(f1, f2)` for one variance, given the design draws (ignored on the
/// boundary, where only their count `M` matters).
pub fn criteria_for_variance(
    regime: CriterionRegime,
    design: &[f64],
    params: &CriterionParams,
    sigma2: f64,
    sampler: &dyn ChainSampler,
) -> Result<(f64, f64)> {
    params.validate()?;
    let scores: Vec<(f64, f64)> = design
        .par_iter()
        .enumerate()
        .map(|(i, &d)| replicate_scores(regime, d, params, sigma2, params.chain_seed(i), sampler))
        .collect::<Result<_>>()?;
    // Summed in replicate order so the result does not depend on scheduling.
    let m = scores.len() as f64;
    let (s1, s2) = scores.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    Ok((s1 / m, s2 / m))
}

fn regime_design(regime: CriterionRegime, params: &CriterionParams) -> Vec<f64> {
    match default_design(regime, params.t) {
        Some(d) => design_points(&d, params.replicates, params.seed),
        None => vec![params.t; params.replicates],
    }
}

pub fn f1_interior(params: &CriterionParams, sigma2: f64, sampler: &dyn ChainSampler) -> Result<f64> {
    let design = regime_design(CriterionRegime::Interior, params);
    Ok(criteria_for_variance(CriterionRegime::Interior, &design, params, sigma2, sampler)?.0)
}

pub fn f2_interior(params: &CriterionParams, sigma2: f64, sampler: &dyn ChainSampler) -> Result<f64> {
    let design = regime_design(CriterionRegime::Interior, params);
    Ok(criteria_for_variance(CriterionRegime::Interior, &design, params, sigma2, sampler)?.1)
}

pub fn f1_boundary(params: &CriterionParams, sigma2: f64, sampler: &dyn ChainSampler) -> Result<f64> {
    let design = regime_design(CriterionRegime::Boundary, params);
    Ok(criteria_for_variance(CriterionRegime::Boundary, &design, params, sigma2, sampler)?.0)
}

pub fn f2_boundary(params: &CriterionParams, sigma2: f64, sampler: &dyn ChainSampler) -> Result<f64> {
    let design = regime_design(CriterionRegime::Boundary, params);
    Ok(criteria_for_variance(CriterionRegime::Boundary, &design, params, sigma2, sampler)?.1)
}

pub fn f1_exterior(params: &CriterionParams, sigma2: f64, sampler: &dyn ChainSampler) -> Result<f64> {
    let design = regime_design(CriterionRegime::Exterior, params);
    Ok(criteria_for_variance(CriterionRegime::Exterior, &design, params, sigma2, sampler)?.0)
}

pub fn f2_exterior(params: &CriterionParams, sigma2: f64, sampler: &dyn ChainSampler) -> Result<f64> {
    let design = regime_design(CriterionRegime::Exterior, params);
    Ok(criteria_for_variance(CriterionRegime::Exterior, &design, params, sigma2, sampler)?.1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriterionRow {
    pub sigma2: f64,
    pub f1: f64,
    pub f2: f64,
}

impl CriterionRow {
    pub fn total(&self) -> f64 {
        self.f1 + self.f2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    pub regime: CriterionRegime,
    pub rows: Vec<CriterionRow>,
    pub best_sigma2: f64,
    pub params: CriterionParams,
}

/// Scores every variance of `family` on the same design draws and picks the
/// minimizer of `f1 + f2`, preferring the smaller `σ²` on ties.
pub fn rank_proposals(
    family: &ProposalFamily,
    regime: CriterionRegime,
    params: &CriterionParams,
    sampler: &dyn ChainSampler,
) -> Result<CriterionReport> {
    params.validate()?;
    let design = regime_design(regime, params);
    let rows = family
        .variances()
        .iter()
        .map(|&sigma2| {
            let (f1, f2) = criteria_for_variance(regime, &design, params, sigma2, sampler)?;
            Ok(CriterionRow { sigma2, f1, f2 })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = rows
        .iter()
        .min_by(|a, b| a.total().total_cmp(&b.total()).then(a.sigma2.total_cmp(&b.sigma2)))
        .expect("family is non-empty");
    Ok(CriterionReport {
        regime,
        best_sigma2: best.sigma2,
        rows,
        params: *params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> CriterionParams {
        CriterionParams {
            t: 1.0,
            temperature: 0.1,
            chain_length: 2000,
            replicates: 40,
            seed,
        }
    }

    #[test]
    fn beta_design_moments() {
        let d = DesignDistribution::beta(1.0, 3.0).unwrap();
        let xs = design_points(&d, 50_000, 1);
        assert!(xs.iter().all(|&u| (0.0..1.0).contains(&u)));
        let m = mean(&xs);
        assert!((m - 0.25).abs() < 0.005, "{m}");
        let frac = xs.iter().filter(|&&u| u < 0.5).count() as f64 / xs.len() as f64;
        assert!((frac - 0.875).abs() < 0.006, "{frac}");

        let general = DesignDistribution::beta(2.0, 2.0).unwrap();
        assert!((mean(&design_points(&general, 50_000, 2)) - 0.5).abs() < 0.005);
        assert!(DesignDistribution::beta(0.0, 1.0).is_err());
    }

    #[test]
    fn pareto_design_moments() {
        let d = DesignDistribution::pareto(3.0, 1.0).unwrap();
        let xs = design_points(&d, 100_000, 3);
        assert!(xs.iter().all(|&x| x >= 1.0 && x.is_finite()));
        let frac = xs.iter().filter(|&&x| x > 2.0).count() as f64 / xs.len() as f64;
        assert!((frac - 0.125).abs() < 0.004, "{frac}");
        assert!(DesignDistribution::pareto(3.0, -1.0).is_err());
        assert_eq!(d.mean(), 1.5);
    }

    #[test]
    fn family_validation() {
        assert!(ProposalFamily::new(vec![]).is_err());
        assert!(ProposalFamily::new(vec![1.0, -2.0]).is_err());
        assert!(ProposalFamily::new(vec![1.0, 9.0, 1.0]).is_err());
        assert_eq!(
            ProposalFamily::new(vec![1.0, 9.0, 16.0]).unwrap().variances(),
            &[1.0, 9.0, 16.0]
        );
    }

    #[test]
    fn oracle_sampler_drives_criteria_to_zero() {
        let oracle = LimitLawSampler;
        for (regime, bound) in [
            (CriterionRegime::Interior, 0.01),
            (CriterionRegime::Boundary, 0.01),
            (CriterionRegime::Exterior, 0.01),
        ] {
            let coarse = CriterionParams {
                chain_length: 1_000,
                ..small(5)
            };
            let fine = CriterionParams {
                chain_length: 64_000,
                ..small(5)
            };
            let design = regime_design(regime, &coarse);
            let (a1, a2) = criteria_for_variance(regime, &design, &coarse, 1.0, &oracle).unwrap();
            let (b1, b2) = criteria_for_variance(regime, &design, &fine, 1.0, &oracle).unwrap();
            assert!(b1 < a1 && b2 < a2, "{regime:?}: {a1} {a2} -> {b1} {b2}");
            assert!(b1 < bound && b2 < bound, "{regime:?}: {b1} {b2}");
        }
    }

    #[test]
    fn oracle_rate_is_root_n() {
        // 64x more draws should shrink the Monte Carlo error about 8x.
        let oracle = LimitLawSampler;
        let p = |n| CriterionParams {
            chain_length: n,
            replicates: 200,
            ..small(8)
        };
        let coarse = f1_exterior(&p(500), 1.0, &oracle).unwrap();
        let fine = f1_exterior(&p(32_000), 1.0, &oracle).unwrap();
        let ratio = coarse / fine;
        assert!((5.0..12.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn scores_are_deterministic_and_nonnegative() {
        let fam = ProposalFamily::new(vec![1.0, 9.0]).unwrap();
        let a = rank_proposals(&fam, CriterionRegime::Interior, &small(9), &MhSampler::default()).unwrap();
        let b = rank_proposals(&fam, CriterionRegime::Interior, &small(9), &MhSampler::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.rows.iter().all(|r| r.f1 >= 0.0 && r.f2 >= 0.0));
        let best = a.rows.iter().map(CriterionRow::total).fold(f64::INFINITY, f64::min);
        assert_eq!(a.rows.iter().find(|r| r.sigma2 == a.best_sigma2).unwrap().total(), best);
    }

    struct Constant(f64);

    impl ChainSampler for Constant {
        fn chain(&self, _y: f64, _t: f64, _temp: f64, _s: f64, n: usize, _seed: u64) -> Result<Vec<f64>> {
            Ok(vec![self.0; n])
        }
    }

    #[test]
    fn ties_go_to_the_smaller_variance() {
        let fam = ProposalFamily::new(vec![16.0, 1.0, 9.0]).unwrap();
        let r = rank_proposals(&fam, CriterionRegime::Exterior, &small(1), &Constant(1.0)).unwrap();
        assert_eq!(r.best_sigma2, 1.0);
    }

    #[test]
    fn boundary_without_positive_states_is_degenerate() {
        let r = f1_boundary(&small(1), 1.0, &Constant(-0.5));
        assert!(matches!(r, Err(Error::DegenerateChain(_))));
    }

    #[test]
    fn boundary_scores_by_hand() {
        // Chain alternating 0.2, -0.1: positive mean 0.2, second moment 0.025.
        struct Alt;
        impl ChainSampler for Alt {
            fn chain(&self, _y: f64, _t: f64, _temp: f64, _s: f64, n: usize, _seed: u64) -> Result<Vec<f64>> {
                Ok((0..n).map(|i| if i % 2 == 0 { 0.2 } else { -0.1 }).collect())
            }
        }
        let p = CriterionParams {
            replicates: 3,
            chain_length: 10,
            ..small(1)
        };
        let f1 = f1_boundary(&p, 1.0, &Alt).unwrap();
        let f2 = f2_boundary(&p, 1.0, &Alt).unwrap();
        assert!((f1 - (0.2 - (0.2 / PI).sqrt()).abs()).abs() < 1e-15);
        assert!((f2 - (0.025f64 - 0.1).abs()).abs() < 1e-15);
    }
}
