//! Small statistics helpers used by the verification code.

use statrs::distribution::{ChiSquared, ContinuousCDF};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Sample autocorrelation at `lag`. Returns 1 for a constant series.
pub fn autocorrelation(xs: &[f64], lag: usize) -> f64 {
    let n = xs.len();
    if lag >= n {
        return 0.0;
    }
    let m = mean(xs);
    let denom: f64 = xs.iter().map(|v| (v - m) * (v - m)).sum();
    if denom == 0.0 {
        return 1.0;
    }
    let num: f64 = (0..n - lag).map(|i| (xs[i] - m) * (xs[i + lag] - m)).sum();
    num / denom
}

/// Smallest lag `k <= max_lag` with autocorrelation below `threshold`
/// (`max_lag` if none is).
pub fn decorrelation_lag(xs: &[f64], threshold: f64, max_lag: usize) -> usize {
    (1..=max_lag)
        .find(|&k| autocorrelation(xs, k) < threshold)
        .unwrap_or(max_lag)
}

/// Standard error of the mean by non-overlapping batch means.
pub fn batch_means_se(xs: &[f64], batches: usize) -> f64 {
    let size = xs.len() / batches;
    assert!(size > 0, "series shorter than the number of batches");
    let means: Vec<f64> = xs.chunks_exact(size).take(batches).map(mean).collect();
    (variance(&means) / batches as f64).sqrt()
}

/// `Φ(x)` for the centred normal with variance `var`.
pub fn normal_cdf(x: f64, var: f64) -> f64 {
    let tail = 0.5 * libm::erfc(x.abs() / (2.0 * var).sqrt());
    if x < 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

pub fn chi_square_quantile(df: f64, p: f64) -> f64 {
    ChiSquared::new(df)
        .expect("degrees of freedom must be positive")
        .inverse_cdf(p)
}
