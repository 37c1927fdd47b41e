//! Zero-temperature limit laws of the scalar problem `F(x) = |x| + (x - y)²/(2t)`.
//!
//! With `u = y/t`:
//!
//! * interior `0 <= u < 1`: `X_T/T` tends to the two-sided exponential law with
//!   density `((1-u²)/2) exp(-|x|(1 - sgn(x) u))`, a mixture of `-Exp(1+u)`
//!   (weight `(1-u)/2`) and `Exp(1-u)` (weight `(1+u)/2`);
//! * boundary `y = t`: on `{X_T < 0}`, `X_T/T → -Exp(2)`; on `{X_T > 0}`,
//!   `X_T/√T → |N(0,t)|`, and the negative side vanishes as `T → 0`;
//! * exterior `y > t`: `(X_T - (y - t))/√T → N(0, t)`.
//!
//! Negative data are covered by the symmetry `X_T(-y,t) = -X_T(y,t)` in law.

use std::f64::consts::PI;

use rand::{Rng, RngExt};
use rand_distr::{Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::stats::normal_cdf;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    Interior { u: f64 },
    Boundary { t: f64 },
    Exterior { t: f64 },
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::Interior { .. } => "interior",
            Regime::Boundary { .. } => "boundary",
            Regime::Exterior { .. } => "exterior",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryBranch {
    Negative,
    Positive,
}

/// The limit law of one regime. For the boundary this is the unconditional
/// limit `|N(0,t)|` of `X_T/√T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitLaw1D {
    regime: Regime,
}

impl LimitLaw1D {
    pub fn new(regime: Regime) -> Result<Self> {
        match regime {
            Regime::Interior { u } => check_interior(u)?,
            Regime::Boundary { t } | Regime::Exterior { t } => check_t(t)?,
        }
        Ok(Self { regime })
    }

    pub fn interior(u: f64) -> Result<Self> {
        Self::new(Regime::Interior { u })
    }

    pub fn boundary(t: f64) -> Result<Self> {
        Self::new(Regime::Boundary { t })
    }

    pub fn exterior(t: f64) -> Result<Self> {
        Self::new(Regime::Exterior { t })
    }

    /// Regime of data `(y, t)`, plus the orientation `±1` that maps the
    /// law for `|y|` onto the law for `y`.
    pub fn for_data(y: f64, t: f64) -> Result<(Self, f64)> {
        check_t(t)?;
        let orientation = if y < 0.0 { -1.0 } else { 1.0 };
        let a = y.abs();
        let regime = if a < t {
            Regime::Interior { u: a / t }
        } else if a == t {
            Regime::Boundary { t }
        } else {
            Regime::Exterior { t }
        };
        Ok((Self::new(regime)?, orientation))
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn density(&self, x: f64) -> f64 {
        match self.regime {
            Regime::Interior { u } => interior_density_unchecked(u, x),
            Regime::Boundary { t } => {
                if x > 0.0 {
                    2.0 * gaussian_density(x, t)
                } else {
                    0.0
                }
            }
            Regime::Exterior { t } => gaussian_density(x, t),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.regime {
            Regime::Interior { u } => interior_cdf_unchecked(u, x),
            Regime::Boundary { t } => {
                if x > 0.0 {
                    2.0 * normal_cdf(x, t) - 1.0
                } else {
                    0.0
                }
            }
            Regime::Exterior { t } => normal_cdf(x, t),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.regime {
            Regime::Interior { u } => sample_interior_unchecked(u, rng),
            Regime::Boundary { t } => boundary_law_unchecked(t, BoundaryBranch::Positive, rng),
            Regime::Exterior { t } => exterior_law_unchecked(t, rng),
        }
    }

    pub fn mean(&self) -> f64 {
        match self.regime {
            Regime::Interior { u } => 2.0 * u / (1.0 - u * u),
            Regime::Boundary { t } => (2.0 * t / PI).sqrt(),
            Regime::Exterior { .. } => 0.0,
        }
    }

    pub fn second_moment(&self) -> f64 {
        match self.regime {
            Regime::Interior { u } => m2_unchecked(u),
            Regime::Boundary { t } | Regime::Exterior { t } => t,
        }
    }
}

fn check_interior(u: f64) -> Result<()> {
    if !(0.0..1.0).contains(&u) {
        return Err(Error::invalid(format!("interior regime needs 0 <= u < 1, got {u}")));
    }
    Ok(())
}

fn check_t(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("t must be positive, got {t}")));
    }
    Ok(())
}

fn gaussian_density(x: f64, var: f64) -> f64 {
    (-x * x / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

/// `((1-u²)/2) exp(-|x|(1 - sgn(x) u))`.
pub fn interior_density(u: f64, x: f64) -> Result<f64> {
    check_interior(u)?;
    Ok(interior_density_unchecked(u, x))
}

fn interior_density_unchecked(u: f64, x: f64) -> f64 {
    let rate = if x >= 0.0 { 1.0 - u } else { 1.0 + u };
    0.5 * (1.0 - u * u) * (-x.abs() * rate).exp()
}

/// CDF of the interior mixture:
/// `((1-u)/2) e^{(1+u)x}` for `x < 0`, `1 - ((1+u)/2) e^{-(1-u)x}` for `x >= 0`.
pub fn interior_cdf(u: f64, x: f64) -> Result<f64> {
    check_interior(u)?;
    Ok(interior_cdf_unchecked(u, x))
}

fn interior_cdf_unchecked(u: f64, x: f64) -> f64 {
    if x < 0.0 {
        0.5 * (1.0 - u) * ((1.0 + u) * x).exp()
    } else {
        1.0 - 0.5 * (1.0 + u) * (-(1.0 - u) * x).exp()
    }
}

/// `-Exp(1+u)` with probability `(1-u)/2`, otherwise `Exp(1-u)`.
pub fn sample_interior<R: Rng + ?Sized>(u: f64, rng: &mut R) -> Result<f64> {
    check_interior(u)?;
    Ok(sample_interior_unchecked(u, rng))
}

fn sample_interior_unchecked<R: Rng + ?Sized>(u: f64, rng: &mut R) -> f64 {
    let coin: f64 = rng.random();
    let e: f64 = rng.sample(Exp1);
    if coin < 0.5 * (1.0 - u) {
        -e / (1.0 + u)
    } else {
        e / (1.0 - u)
    }
}

/// Mean of the interior law, `2u/(1-u²)`. At `u = 0` this is 0, which makes
/// bias-based temperature selection impossible there.
pub fn m1(u: f64) -> Result<f64> {
    check_interior(u)?;
    if u == 0.0 {
        log::warn!("m1(0) = 0: a bias target cannot be met at y = 0");
    }
    Ok(2.0 * u / (1.0 - u * u))
}

/// Second moment of the interior law, `(1-u)/(1+u)² + (1+u)/(1-u)²`.
pub fn m2(u: f64) -> Result<f64> {
    check_interior(u)?;
    Ok(m2_unchecked(u))
}

fn m2_unchecked(u: f64) -> f64 {
    (1.0 - u) / ((1.0 + u) * (1.0 + u)) + (1.0 + u) / ((1.0 - u) * (1.0 - u))
}

/// Boundary branches: `-Exp(2)` (negative side, `T`-scaled) or `|N(0,t)|`
/// (positive side, `√T`-scaled).
pub fn boundary_law<R: Rng + ?Sized>(t: f64, branch: BoundaryBranch, rng: &mut R) -> Result<f64> {
    check_t(t)?;
    Ok(boundary_law_unchecked(t, branch, rng))
}

fn boundary_law_unchecked<R: Rng + ?Sized>(t: f64, branch: BoundaryBranch, rng: &mut R) -> f64 {
    match branch {
        BoundaryBranch::Negative => {
            let e: f64 = rng.sample(Exp1);
            -e / 2.0
        }
        BoundaryBranch::Positive => {
            let z: f64 = rng.sample(StandardNormal);
            (t.sqrt() * z).abs()
        }
    }
}

/// `N(0, t)`.
pub fn exterior_law<R: Rng + ?Sized>(t: f64, rng: &mut R) -> Result<f64> {
    check_t(t)?;
    Ok(exterior_law_unchecked(t, rng))
}

fn exterior_law_unchecked<R: Rng + ?Sized>(t: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    t.sqrt() * z
}

/// Kolmogorov-Smirnov distance `sup |F_n - F|` between the empirical law of
/// `samples` (any order) and `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("KS statistic of an empty sample"));
    }
    if samples.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("KS statistic of a sample containing NaN"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    Ok(d)
}
