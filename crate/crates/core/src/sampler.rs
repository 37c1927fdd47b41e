//! Metropolis-Hastings sampling of the Gibbs measure `∝ exp(-F(x)/T)` and
//! simulated annealing on the geometric schedule `T_n = 1/(β0 qⁿ)`.

use rand::RngExt;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::Problem;
use crate::rng::{rng_from_seed, ChainRng};

/// Anything with an energy the sampler can target.
pub trait Energy: Sync {
    fn dim(&self) -> usize;
    fn energy(&self, x: &[f64]) -> f64;
}

impl Energy for Problem {
    fn dim(&self) -> usize {
        self.p()
    }

    fn energy(&self, x: &[f64]) -> f64 {
        self.objective_unchecked(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProposalKind {
    /// `x' = x + N(0, σ² I)`; symmetric, so the Hastings ratio is `exp(-ΔF/T)`.
    #[default]
    RandomWalk,
    /// `x' ~ N(0, σ² I)` regardless of the current state.
    Independence,
}

impl std::str::FromStr for ProposalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random-walk" | "rw" => Ok(Self::RandomWalk),
            "independence" | "indep" => Ok(Self::Independence),
            other => Err(Error::invalid(format!("unknown proposal kind {other:?}"))),
        }
    }
}

/// Gaussian proposal shared by MH and SA.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub kind: ProposalKind,
    pub sigma2: f64,
    /// Optional per-coordinate multipliers of the standard deviation
    /// (a diagonal proposal covariance `σ² diag(s_i²)`).
    pub coordinate_scales: Option<Vec<f64>>,
}

impl Proposal {
    pub fn random_walk(sigma2: f64) -> Self {
        Self {
            kind: ProposalKind::RandomWalk,
            sigma2,
            coordinate_scales: None,
        }
    }

    fn std_devs(&self, dim: usize) -> Result<Vec<f64>> {
        if !(self.sigma2 > 0.0) || !self.sigma2.is_finite() {
            return Err(Error::invalid(format!(
                "proposal variance must be positive, got {}",
                self.sigma2
            )));
        }
        let sigma = self.sigma2.sqrt();
        match &self.coordinate_scales {
            None => Ok(vec![sigma; dim]),
            Some(s) if s.len() != dim => Err(Error::DimensionMismatch {
                expected: dim,
                got: s.len(),
            }),
            Some(s) if s.iter().any(|v| !(*v > 0.0)) => Err(Error::invalid("proposal scales must be positive")),
            Some(s) => Ok(s.iter().map(|v| v * sigma).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MhConfig {
    pub temperature: f64,
    pub proposal: Proposal,
    pub chain_length: usize,
    pub burn_in: usize,
    /// Keep every `thinning`-th state after burn-in.
    pub thinning: usize,
    pub seed: u64,
    /// Defaults to the origin.
    pub initial_state: Option<Vec<f64>>,
}

impl MhConfig {
    /// Random-walk proposal, start at 0, burn-in of 10% of the chain.
    pub fn new(temperature: f64, proposal_sigma2: f64, chain_length: usize, seed: u64) -> Self {
        Self {
            temperature,
            proposal: Proposal::random_walk(proposal_sigma2),
            chain_length,
            burn_in: chain_length / 10,
            thinning: 1,
            seed,
            initial_state: None,
        }
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_thinning(mut self, thinning: usize) -> Self {
        self.thinning = thinning;
        self
    }

    pub fn with_initial_state(mut self, x0: Vec<f64>) -> Self {
        self.initial_state = Some(x0);
        self
    }

    pub fn with_proposal(mut self, proposal: Proposal) -> Self {
        self.proposal = proposal;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(Error::invalid(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if self.chain_length == 0 {
            return Err(Error::invalid("chain length must be positive"));
        }
        if self.burn_in >= self.chain_length {
            return Err(Error::invalid(format!(
                "burn-in {} must be shorter than the chain ({})",
                self.burn_in, self.chain_length
            )));
        }
        if self.thinning == 0 {
            return Err(Error::invalid("thinning must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealConfig {
    pub beta0: f64,
    pub q: f64,
    pub proposal: Proposal,
    pub chain_length: usize,
    pub seed: u64,
    pub initial_state: Option<Vec<f64>>,
}

impl AnnealConfig {
    pub fn new(beta0: f64, q: f64, proposal_sigma2: f64, chain_length: usize, seed: u64) -> Self {
        Self {
            beta0,
            q,
            proposal: Proposal::random_walk(proposal_sigma2),
            chain_length,
            seed,
            initial_state: None,
        }
    }

    pub fn with_initial_state(mut self, x0: Vec<f64>) -> Self {
        self.initial_state = Some(x0);
        self
    }

    /// `T_n = 1/(β0 qⁿ)`.
    pub fn temperature_at(&self, n: usize) -> f64 {
        geometric_temperature(self.beta0, self.q, n)
    }

    fn validate(&self) -> Result<()> {
        if !(self.beta0 > 0.0) || !self.beta0.is_finite() {
            return Err(Error::invalid(format!("β0 must be positive, got {}", self.beta0)));
        }
        if !(self.q > 1.0) || !self.q.is_finite() {
            return Err(Error::invalid(format!("q must exceed 1, got {}", self.q)));
        }
        if self.chain_length == 0 {
            return Err(Error::invalid("chain length must be positive"));
        }
        Ok(())
    }
}

/// `T_n = 1/(β0 qⁿ)`.
pub fn geometric_temperature(beta0: f64, q: f64, n: usize) -> f64 {
    1.0 / (beta0 * q.powf(n as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChainConfig {
    Metropolis(MhConfig),
    Annealing(AnnealConfig),
}

/// States of one chain, stored row-major (`len() × dim`).
#[derive(Debug, Clone, PartialEq)]
pub struct ChainResult {
    dim: usize,
    states: Vec<f64>,
    /// Temperature used at each kept step (annealing only).
    temperatures: Option<Vec<f64>>,
    pub accepted: usize,
    pub proposed: usize,
    pub seed: u64,
    pub config: ChainConfig,
}

impl ChainResult {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn states(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.states.chunks_exact(self.dim)
    }

    /// Trajectory of one coordinate.
    pub fn coordinate(&self, i: usize) -> Vec<f64> {
        self.states().map(|s| s[i]).collect()
    }

    pub fn last(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn temperatures(&self) -> Option<&[f64]> {
        self.temperatures.as_deref()
    }

    /// accepted / proposed over the whole run, burn-in included.
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    /// Per-coordinate mean of the kept states.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for s in self.states() {
            for (acc, v) in m.iter_mut().zip(s) {
                *acc += v;
            }
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }
}

struct Walker<'a, E: ?Sized> {
    energy: &'a E,
    std_devs: Vec<f64>,
    kind: ProposalKind,
    rng: ChainRng,
    current: Vec<f64>,
    current_energy: f64,
    candidate: Vec<f64>,
    accepted: usize,
    proposed: usize,
}

impl<'a, E: Energy + ?Sized> Walker<'a, E> {
    fn new(energy: &'a E, proposal: &Proposal, initial: Option<&[f64]>, seed: u64) -> Result<Self> {
        let dim = energy.dim();
        let std_devs = proposal.std_devs(dim)?;
        let current = match initial {
            Some(x0) if x0.len() != dim => {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: x0.len(),
                })
            }
            Some(x0) => x0.to_vec(),
            None => vec![0.0; dim],
        };
        let current_energy = energy.energy(&current);
        if !current_energy.is_finite() {
            return Err(Error::NonFiniteObjective { state: current });
        }
        Ok(Self {
            energy,
            std_devs,
            kind: proposal.kind,
            rng: rng_from_seed(seed),
            candidate: current.clone(),
            current,
            current_energy,
            accepted: 0,
            proposed: 0,
        })
    }

    /// One Metropolis-Hastings transition at the given temperature.
    fn step(&mut self, temperature: f64) -> Result<()> {
        // log q(x) - log q(x') for the independence proposal.
        let mut log_proposal_ratio = 0.0;
        for i in 0..self.current.len() {
            let z: f64 = self.rng.sample(StandardNormal);
            let sd = self.std_devs[i];
            match self.kind {
                ProposalKind::RandomWalk => self.candidate[i] = self.current[i] + sd * z,
                ProposalKind::Independence => {
                    self.candidate[i] = sd * z;
                    let cur = self.current[i] / sd;
                    log_proposal_ratio += 0.5 * (z * z - cur * cur);
                }
            }
        }
        let candidate_energy = self.energy.energy(&self.candidate);
        if !candidate_energy.is_finite() {
            return Err(Error::NonFiniteObjective {
                state: self.candidate.clone(),
            });
        }
        self.proposed += 1;
        let delta = candidate_energy - self.current_energy;
        let log_ratio = if delta <= 0.0 {
            log_proposal_ratio
        } else {
            -delta / temperature + log_proposal_ratio
        };
        let accept = log_ratio >= 0.0 || {
            let u: f64 = self.rng.random();
            u.ln() < log_ratio
        };
        if accept {
            std::mem::swap(&mut self.current, &mut self.candidate);
            self.current_energy = candidate_energy;
            self.accepted += 1;
        }
        Ok(())
    }
}

/// Random-walk (or independence) Metropolis at fixed temperature. Returns
/// every `thinning`-th of the `chain_length - burn_in` states after burn-in;
/// the initial state is not part of the chain.
pub fn mh_chain<E: Energy + ?Sized>(problem: &E, config: &MhConfig) -> Result<ChainResult> {
    config.validate()?;
    let mut walker = Walker::new(problem, &config.proposal, config.initial_state.as_deref(), config.seed)?;
    let dim = problem.dim();
    let kept = (config.chain_length - config.burn_in) / config.thinning;
    let mut states = Vec::with_capacity(kept * dim);
    for n in 0..config.chain_length {
        walker.step(config.temperature)?;
        if n >= config.burn_in && (n + 1 - config.burn_in) % config.thinning == 0 {
            states.extend_from_slice(&walker.current);
        }
    }
    Ok(ChainResult {
        dim,
        states,
        temperatures: None,
        accepted: walker.accepted,
        proposed: walker.proposed,
        seed: config.seed,
        config: ChainConfig::Metropolis(config.clone()),
    })
}

/// Simulated annealing: step `n = 1..=chain_length` uses `T_n = 1/(β0 qⁿ)`.
/// The full trajectory is returned.
pub fn sa_chain<E: Energy + ?Sized>(problem: &E, config: &AnnealConfig) -> Result<ChainResult> {
    config.validate()?;
    let mut walker = Walker::new(problem, &config.proposal, config.initial_state.as_deref(), config.seed)?;
    let dim = problem.dim();
    let mut states = Vec::with_capacity(config.chain_length * dim);
    let mut temperatures = Vec::with_capacity(config.chain_length);
    for n in 1..=config.chain_length {
        let temp = config.temperature_at(n);
        walker.step(temp)?;
        states.extend_from_slice(&walker.current);
        temperatures.push(temp);
    }
    Ok(ChainResult {
        dim,
        states,
        temperatures: Some(temperatures),
        accepted: walker.accepted,
        proposed: walker.proposed,
        seed: config.seed,
        config: ChainConfig::Annealing(config.clone()),
    })
}

/// Smallest `n` with `t0 / qⁿ <= t_target`, i.e. `ceil(ln(t0/t_target)/ln q)`.
/// Returns 0 (with a warning) when the target equals the start.
pub fn sa_iterations(t0: f64, t_target: f64, q: f64) -> Result<usize> {
    if !(t0 > 0.0) || !(t_target > 0.0) {
        return Err(Error::invalid("temperatures must be positive"));
    }
    if !(q > 1.0) || !q.is_finite() {
        return Err(Error::invalid(format!("q must exceed 1, got {q}")));
    }
    if t_target == t0 {
        log::warn!("annealing target temperature equals the initial temperature; no steps needed");
        return Ok(0);
    }
    if t_target > t0 {
        return Err(Error::invalid(format!(
            "target temperature {t_target} is above the initial temperature {t0}"
        )));
    }
    let temp = |n: usize| t0 / q.powf(n as f64);
    let mut n = ((t0 / t_target).ln() / q.ln()).ceil() as usize;
    // Guard the ceil against rounding in either direction.
    while temp(n) > t_target {
        n += 1;
    }
    while n > 0 && temp(n - 1) <= t_target {
        n -= 1;
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(y: f64) -> Problem {
        Problem::scalar(y, 1.0).unwrap()
    }

    #[test]
    fn hot_chain_accepts_nearly_everything() {
        let cfg = MhConfig::new(1e6, 1.0, 1000, 3).with_burn_in(0);
        let res = mh_chain(&scalar(0.5), &cfg).unwrap();
        assert!(res.acceptance_rate() > 0.99, "{}", res.acceptance_rate());
        assert_eq!(res.len(), 1000);
    }

    #[test]
    fn acceptance_rate_is_exact_ratio() {
        let cfg = MhConfig::new(0.1, 1.0, 500, 9);
        let res = mh_chain(&scalar(0.5), &cfg).unwrap();
        assert_eq!(res.proposed, 500);
        assert_eq!(res.acceptance_rate(), res.accepted as f64 / 500.0);
        assert_eq!(res.len(), 450);
    }

    #[test]
    fn thinning_keeps_every_kth_state() {
        let full = mh_chain(&scalar(0.5), &MhConfig::new(0.1, 1.0, 1000, 4).with_burn_in(100)).unwrap();
        let thin = mh_chain(
            &scalar(0.5),
            &MhConfig::new(0.1, 1.0, 1000, 4).with_burn_in(100).with_thinning(7),
        )
        .unwrap();
        assert_eq!(thin.len(), 900 / 7);
        for (i, s) in thin.states().enumerate() {
            assert_eq!(s, full.state(7 * i + 6));
        }
        assert_eq!(thin.accepted, full.accepted);
    }

    #[test]
    fn zero_variance_is_rejected() {
        let cfg = MhConfig::new(0.1, 0.0, 100, 1);
        assert!(matches!(mh_chain(&scalar(0.5), &cfg), Err(Error::InvalidParameter(_))));
        let cfg = AnnealConfig::new(1.0, 1.001, 0.0, 100, 1);
        assert!(sa_chain(&scalar(0.5), &cfg).is_err());
    }

    #[test]
    fn config_preconditions() {
        let p = scalar(0.5);
        assert!(mh_chain(&p, &MhConfig::new(0.0, 1.0, 10, 1)).is_err());
        assert!(mh_chain(&p, &MhConfig::new(0.1, 1.0, 10, 1).with_burn_in(10)).is_err());
        assert!(mh_chain(&p, &MhConfig::new(0.1, 1.0, 10, 1).with_initial_state(vec![0.0, 1.0])).is_err());
        assert!(sa_chain(&p, &AnnealConfig::new(1.0, 1.0, 1.0, 10, 1)).is_err());
    }

    #[test]
    fn overflow_is_reported_with_state() {
        let cfg = MhConfig::new(1.0, 1.0, 10, 1).with_initial_state(vec![1e200]);
        match mh_chain(&scalar(0.5), &cfg) {
            Err(Error::NonFiniteObjective { state }) => assert_eq!(state, vec![1e200]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn chains_are_deterministic() {
        let p = Problem::new(
            nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, 0.4, -0.2, 1.0]),
            nalgebra::DVector::from_row_slice(&[0.7, 1.3]),
            0.5,
        )
        .unwrap();
        let cfg = MhConfig::new(0.05, 0.3, 2000, 42);
        assert_eq!(mh_chain(&p, &cfg).unwrap(), mh_chain(&p, &cfg).unwrap());
        let sa = AnnealConfig::new(1.0, 1.001, 0.3, 2000, 42);
        assert_eq!(sa_chain(&p, &sa).unwrap(), sa_chain(&p, &sa).unwrap());
        let other = MhConfig::new(0.05, 0.3, 2000, 43);
        assert_ne!(mh_chain(&p, &cfg).unwrap().states, mh_chain(&p, &other).unwrap().states);
    }

    #[test]
    fn schedule_values() {
        let cfg = AnnealConfig::new(1.0, 1.001, 1.0, 10, 0);
        assert_eq!(cfg.temperature_at(0), 1.0);
        assert!((cfg.temperature_at(1000) - 0.367_879_4).abs() < 1e-3);
        assert!((cfg.temperature_at(1000) / 1.001f64.powi(-1000) - 1.0).abs() < 1e-12);
        let cfg = AnnealConfig::new(2.0, 1.01, 1.0, 10, 0);
        assert_eq!(cfg.temperature_at(0), 0.5);
    }

    #[test]
    fn annealing_records_its_schedule() {
        let cfg = AnnealConfig::new(1.0, 1.01, 1.0, 50, 5);
        let res = sa_chain(&scalar(0.5), &cfg).unwrap();
        let temps = res.temperatures().unwrap();
        assert_eq!(temps.len(), 50);
        assert_eq!(temps[0], cfg.temperature_at(1));
        assert!(temps.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn sa_iteration_budget() {
        assert_eq!(sa_iterations(1.0, 1.0, 1.5).unwrap(), 0);
        assert_eq!(sa_iterations(1.0, 0.0075, 1.001).unwrap(), 4896);
        assert_eq!(sa_iterations(1.0, 0.1, 1.001).unwrap(), 2304);
        assert!(sa_iterations(1.0, 2.0, 1.001).is_err());
        assert!(sa_iterations(1.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn independence_proposal_runs() {
        let mut cfg = MhConfig::new(0.5, 1.0, 2000, 1);
        cfg.proposal.kind = ProposalKind::Independence;
        let res = mh_chain(&scalar(0.5), &cfg).unwrap();
        assert!(res.acceptance_rate() > 0.05);
    }
}
