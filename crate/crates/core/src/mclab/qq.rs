//! Quantile-quantile points against the standard normal.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{domain, Result};

/// Standard normal quantile function.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Empirical quantile of sorted data with the midpoint rule: probability `p`
/// sits at 0-based position `n p - 0.5`, linearly interpolated and clamped
/// to the extreme order statistics.
pub fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let pos = (n as f64 * p - 0.5).clamp(0.0, (n - 1) as f64);
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// `(theoretical, empirical)` pairs at plotting positions `(i - 0.5) / n_quantiles`.
pub fn qq_points(sample: &[f64], n_quantiles: usize) -> Result<Vec<(f64, f64)>> {
    if n_quantiles < 2 || sample.len() < n_quantiles {
        return domain(format!(
            "qq_points needs sample size ({}) >= n_quantiles ({n_quantiles}) >= 2",
            sample.len()
        ));
    }
    if sample.iter().any(|x| x.is_nan()) {
        return domain("qq_points: sample contains NaN");
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok((1..=n_quantiles)
        .map(|i| {
            let p = (i as f64 - 0.5) / n_quantiles as f64;
            (normal_quantile(p), empirical_quantile(&sorted, p))
        })
        .collect())
}
