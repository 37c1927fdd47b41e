//! Temperatures that hit a target bias `b` and mean-square error `MSE` at low
//! temperature, per regime of the scalar problem.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::limit::{m1, m2, Regime};

/// Relative slack on the bias/MSE compatibility constraint.
pub const STRICT_TOLERANCE: f64 = 1e-6;
/// Slack that admits constraint pairs quoted to a few significant digits.
pub const REPRODUCTION_TOLERANCE: f64 = 0.05;

const BOUNDARY_PAIR_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperatureTarget {
    /// `None` when only the mean-square error is controlled.
    pub bias: Option<f64>,
    pub mse: f64,
    pub regime: Regime,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::invalid(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

fn check_open_unit(u: f64) -> Result<()> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::invalid(format!(
            "bias control needs 0 < u < 1 (m1 vanishes at u = 0), got {u}"
        )));
    }
    Ok(())
}

/// `T(b, u) = b / m1(u)`.
pub fn temp_from_bias_interior(b: f64, u: f64) -> Result<f64> {
    check_positive("bias", b)?;
    check_open_unit(u)?;
    Ok(b / m1(u)?)
}

/// `T(MSE, u) = √(MSE / m2(u))`.
pub fn temp_from_mse_interior(mse: f64, u: f64) -> Result<f64> {
    check_positive("MSE", mse)?;
    Ok((mse / m2(u)?).sqrt())
}

/// `m1(u)² / m2(u)`, the value `b²/MSE` must take for the two interior
/// temperatures to agree.
pub fn interior_constraint(u: f64) -> Result<f64> {
    let a = m1(u)?;
    Ok(a * a / m2(u)?)
}

/// Boundary `y = t`: `T(b) = πb²/(2t)`.
pub fn temp_boundary_from_bias(b: f64, t: f64) -> Result<f64> {
    check_positive("bias", b)?;
    check_positive("t", t)?;
    Ok(PI * b * b / (2.0 * t))
}

/// Boundary `y = t`: `T(MSE) = MSE/t`.
pub fn temp_boundary_from_mse(mse: f64, t: f64) -> Result<f64> {
    check_positive("MSE", mse)?;
    check_positive("t", t)?;
    Ok(mse / t)
}

/// Whether `MSE = πb²/2` to within a relative `1e-9`.
pub fn boundary_pair_consistent(b: f64, mse: f64) -> bool {
    let implied = PI * b * b / 2.0;
    (mse - implied).abs() <= BOUNDARY_PAIR_TOLERANCE * implied.abs().max(mse.abs())
}

/// Exterior `y > t`: the bias vanishes and `T = MSE/t`.
pub fn temp_exterior(mse: f64, t: f64) -> Result<f64> {
    check_positive("MSE", mse)?;
    check_positive("t", t)?;
    Ok(mse / t)
}

fn within(actual: f64, required: f64, rel_tol: f64) -> bool {
    (actual - required).abs() <= rel_tol * required.abs().max(f64::MIN_POSITIVE)
}

/// The common temperature `T(b) = T(MSE)` after checking the regime's
/// compatibility constraint to relative tolerance `rel_tol`.
pub fn consistent_temperature(target: &TemperatureTarget, rel_tol: f64) -> Result<f64> {
    check_positive("MSE", target.mse)?;
    let mse = target.mse;
    match (target.regime, target.bias) {
        (Regime::Interior { u }, None) => temp_from_mse_interior(mse, u),
        (Regime::Interior { u }, Some(b)) if u == 0.0 => {
            // By symmetry the bias is 0 at y = 0; only b = 0 is attainable.
            let t_mse = temp_from_mse_interior(mse, 0.0)?;
            if b == 0.0 {
                Ok(t_mse)
            } else {
                Err(Error::InconsistentTarget {
                    temp_from_bias: f64::INFINITY,
                    temp_from_mse: t_mse,
                })
            }
        }
        (Regime::Interior { u }, Some(b)) => {
            let t_bias = temp_from_bias_interior(b, u)?;
            let t_mse = temp_from_mse_interior(mse, u)?;
            if within(b * b / mse, interior_constraint(u)?, rel_tol) {
                Ok(t_bias)
            } else {
                Err(Error::InconsistentTarget {
                    temp_from_bias: t_bias,
                    temp_from_mse: t_mse,
                })
            }
        }
        (Regime::Boundary { t }, None) => temp_boundary_from_mse(mse, t),
        (Regime::Boundary { t }, Some(b)) => {
            let t_bias = temp_boundary_from_bias(b, t)?;
            let t_mse = temp_boundary_from_mse(mse, t)?;
            if within(mse, PI * b * b / 2.0, rel_tol) {
                Ok(t_bias)
            } else {
                Err(Error::InconsistentTarget {
                    temp_from_bias: t_bias,
                    temp_from_mse: t_mse,
                })
            }
        }
        (Regime::Exterior { t }, bias) => {
            let t_mse = temp_exterior(mse, t)?;
            match bias {
                Some(b) if b != 0.0 => Err(Error::InconsistentTarget {
                    temp_from_bias: f64::NAN,
                    temp_from_mse: t_mse,
                }),
                _ => Ok(t_mse),
            }
        }
    }
}

/// Points of the curve grids: 512 uniform points on `[0.001, 0.999]`.
pub const CURVE_POINTS: usize = 512;

pub fn uniform_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let step = (hi - lo) / (points - 1) as f64;
    (0..points).map(|i| lo + step * i as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub u: f64,
    pub temp_from_bias: f64,
    pub temp_from_mse: f64,
    pub constraint: f64,
}

/// `u ↦ T(b,u)`, `u ↦ T(MSE,u)` and `u ↦ m1²/m2` on the standard grid.
pub fn interior_curves(b: f64, mse: f64) -> Result<Vec<CurvePoint>> {
    uniform_grid(0.001, 0.999, CURVE_POINTS)
        .into_iter()
        .map(|u| {
            Ok(CurvePoint {
                u,
                temp_from_bias: temp_from_bias_interior(b, u)?,
                temp_from_mse: temp_from_mse_interior(mse, u)?,
                constraint: interior_constraint(u)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn interior_examples() {
        assert!(close(temp_from_bias_interior(0.01, 0.5).unwrap(), 0.0075, 1e-15));
        assert!(temp_from_bias_interior(0.001, 1.0 - 1e-9).unwrap() < 1e-9);
        assert!(temp_from_bias_interior(0.0, 0.5).is_err());
        assert!(temp_from_bias_interior(0.01, 0.0).is_err());

        assert!(close(temp_from_mse_interior(3.5e-4, 0.5).unwrap(), 0.0075, 1e-12));
        assert!(close(
            temp_from_mse_interior(0.01, 0.0).unwrap(),
            0.005f64.sqrt(),
            1e-15
        ));
        assert!(close(temp_from_mse_interior(0.01, 0.0).unwrap(), 0.0707, 1e-4));
        let base = temp_from_mse_interior(0.02, 0.3).unwrap();
        assert!(close(temp_from_mse_interior(0.08, 0.3).unwrap(), 2.0 * base, 1e-15));
    }

    #[test]
    fn constraint_curve() {
        assert!(close(interior_constraint(0.5).unwrap(), 2.0 / 7.0, 1e-15));
        assert!(interior_constraint(1e-6).unwrap() < 1e-11);
        let grid = uniform_grid(0.001, 0.999, CURVE_POINTS);
        let vals: Vec<f64> = grid.iter().map(|&u| interior_constraint(u).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn boundary_examples() {
        let tb = temp_boundary_from_bias(0.1, 1.0).unwrap();
        assert!(close(tb, 0.015_708, 1e-6));
        let mse = PI * 0.01 / 2.0;
        assert!(close(temp_boundary_from_mse(mse, 1.0).unwrap(), tb, 1e-15));
        assert!(boundary_pair_consistent(0.1, mse));
        assert!(!boundary_pair_consistent(0.1, 0.1));
    }

    #[test]
    fn exterior_examples() {
        assert_eq!(temp_exterior(0.05, 1.0).unwrap(), 0.05);
        assert_eq!(temp_exterior(0.05, 2.0).unwrap(), 0.025);
        assert!(temp_exterior(0.05, 1e12).unwrap() < 1e-12);
    }

    #[test]
    fn consistent_temperature_examples() {
        let interior = TemperatureTarget {
            bias: Some(0.01),
            mse: 3.5e-4,
            regime: Regime::Interior { u: 0.5 },
        };
        assert!(close(
            consistent_temperature(&interior, STRICT_TOLERANCE).unwrap(),
            0.0075,
            1e-12
        ));

        let boundary = TemperatureTarget {
            bias: Some(0.1),
            mse: PI * 0.01 / 2.0,
            regime: Regime::Boundary { t: 1.0 },
        };
        assert!(close(
            consistent_temperature(&boundary, STRICT_TOLERANCE).unwrap(),
            0.015_708,
            1e-6
        ));

        let exterior = TemperatureTarget {
            bias: None,
            mse: 0.01,
            regime: Regime::Exterior { t: 1.0 },
        };
        assert_eq!(consistent_temperature(&exterior, STRICT_TOLERANCE).unwrap(), 0.01);
    }

    #[test]
    fn inconsistent_targets_report_both_temperatures() {
        let bad = TemperatureTarget {
            bias: Some(0.1),
            mse: 0.1,
            regime: Regime::Boundary { t: 1.0 },
        };
        match consistent_temperature(&bad, STRICT_TOLERANCE) {
            Err(Error::InconsistentTarget {
                temp_from_bias,
                temp_from_mse,
            }) => {
                assert!(close(temp_from_bias, 0.015_708, 1e-6));
                assert!(close(temp_from_mse, 0.1, 1e-15));
            }
            other => panic!("{other:?}"),
        }
        // 5% off the interior constraint: rejected strictly, accepted in reproduction mode.
        let loose = TemperatureTarget {
            bias: Some(0.01),
            mse: 3.5e-4 * 1.03,
            regime: Regime::Interior { u: 0.5 },
        };
        assert!(consistent_temperature(&loose, STRICT_TOLERANCE).is_err());
        assert!(consistent_temperature(&loose, REPRODUCTION_TOLERANCE).is_ok());
        let ext = TemperatureTarget {
            bias: Some(0.1),
            mse: 0.01,
            regime: Regime::Exterior { t: 1.0 },
        };
        assert!(consistent_temperature(&ext, STRICT_TOLERANCE).is_err());
    }

    #[test]
    fn zero_data_uses_mse_only() {
        let t = TemperatureTarget {
            bias: Some(0.0),
            mse: 0.01,
            regime: Regime::Interior { u: 0.0 },
        };
        assert!(close(
            consistent_temperature(&t, STRICT_TOLERANCE).unwrap(),
            0.005f64.sqrt(),
            1e-15
        ));
        let t = TemperatureTarget { bias: Some(0.01), ..t };
        assert!(consistent_temperature(&t, STRICT_TOLERANCE).is_err());
    }

    #[test]
    fn temperatures_decrease_in_u() {
        let curves = interior_curves(0.001, 0.01).unwrap();
        assert_eq!(curves.len(), CURVE_POINTS);
        assert_eq!(curves[0].u, 0.001);
        assert!((curves[CURVE_POINTS - 1].u - 0.999).abs() < 1e-15);
        assert!(curves.windows(2).all(|w| w[1].temp_from_bias < w[0].temp_from_bias));
        assert!(curves.windows(2).all(|w| w[1].temp_from_mse < w[0].temp_from_mse));
        assert!(curves.iter().all(|c| c.temp_from_bias > 0.0 && c.temp_from_mse > 0.0));
    }
}
