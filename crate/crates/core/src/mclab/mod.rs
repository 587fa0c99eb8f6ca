//! Monte Carlo estimates of range statistics under Gaussian base logits.
//!
//! For a range of distances `[t1, t2)` and unnormalised weights
//! `A_t = exp(L_t)`:
//!
//! ```text
//! Z = sum A_t
//! N = sum A_t ln A_t
//! H = -N / Z + ln Z      (entropy of A / Z restricted to the range)
//! ```

pub mod fit;
pub mod qq;

use rayon::prelude::*;

use crate::error::{domain, Result};
use crate::rng::{fill_standard_normal, keyed_stream};
use crate::schedule::{ScheduleParams, ScheduleTable};

pub use fit::{ols, LinearFit};
pub use qq::{normal_quantile, qq_points};

/// Largest logit magnitude passed to `exp` on the identity and LogN arms.
pub const LOGIT_CAP: f64 = 700.0;

/// Half-open range of token distances `[t_start, t_end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RangeSpec {
    t_start: u64,
    t_end: u64,
}

impl RangeSpec {
    pub fn new(t_start: u64, t_end: u64) -> Result<Self> {
        if t_start < 1 || t_end <= t_start {
            return domain(format!("invalid range [{t_start}, {t_end}): need 1 <= start < end"));
        }
        Ok(Self { t_start, t_end })
    }

    /// `[t, t * delta)`.
    pub fn scaled(t: u64, delta: u64) -> Result<Self> {
        if delta < 2 {
            return domain(format!("delta must be >= 2, got {delta}"));
        }
        let end = t
            .checked_mul(delta)
            .ok_or_else(|| crate::Error::Domain(format!("t * delta overflows for t={t}, delta={delta}")))?;
        Self::new(t, end)
    }

    pub fn t_start(&self) -> u64 {
        self.t_start
    }

    pub fn t_end(&self) -> u64 {
        self.t_end
    }

    pub fn width(&self) -> usize {
        (self.t_end - self.t_start) as usize
    }
}

/// How base logits are turned into logits before exponentiation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum McModifier {
    Identity,
    Schedule(ScheduleParams),
    /// Multiply by `s ln n`.
    LogN { s: f64, n: u64 },
}

impl McModifier {
    pub fn label(&self) -> &'static str {
        match self {
            McModifier::Identity => "identity",
            McModifier::Schedule(_) => "scale-invariant",
            McModifier::LogN { .. } => "logn",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
    pub modifier: McModifier,
}

impl McConfig {
    pub fn new(samples: usize, seed: u64, modifier: McModifier) -> Result<Self> {
        let cfg = Self {
            samples,
            seed,
            modifier,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.samples < 2 {
            return domain(format!("need at least 2 samples, got {}", self.samples));
        }
        if let McModifier::LogN { s, n } = self.modifier {
            if !s.is_finite() || n < 1 {
                return domain(format!("invalid LogN modifier (s={s}, n={n})"));
            }
        }
        Ok(())
    }
}

/// Sample means and standard errors of `Z`, `N` and `H` over a range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeStats {
    pub z_mean: f64,
    pub z_se: f64,
    pub n_mean: f64,
    pub n_se: f64,
    pub h_mean: f64,
    pub h_se: f64,
    pub samples: usize,
    /// Set when some logit hit [`LOGIT_CAP`].
    pub capped: bool,
}

/// Mean and standard error (sample standard deviation over `sqrt(n)`).
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Per-distance logit map, resolved once per range.
enum LogitMap {
    Identity,
    Scaled(f64),
    Schedule(ScheduleTable),
}

impl LogitMap {
    fn new(modifier: &McModifier, range: &RangeSpec) -> Self {
        match *modifier {
            McModifier::Identity => LogitMap::Identity,
            McModifier::LogN { s, n } => LogitMap::Scaled(s * (n as f64).ln()),
            McModifier::Schedule(params) => {
                LogitMap::Schedule(ScheduleTable::new(&params, range.t_start, range.t_end))
            }
        }
    }

    /// Returns the logit and whether the cap bound.
    #[inline]
    fn apply(&self, offset: usize, base: f64) -> (f64, bool) {
        let raw = match self {
            LogitMap::Identity => base,
            LogitMap::Scaled(k) => k * base,
            LogitMap::Schedule(table) => return (table.apply(offset, base), false),
        };
        if raw.abs() > LOGIT_CAP {
            (raw.clamp(-LOGIT_CAP, LOGIT_CAP), true)
        } else {
            (raw, false)
        }
    }
}

/// IID standard normal base logits, one row per sample.
pub fn sample_base_logits(range: &RangeSpec, cfg: &McConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    Ok((0..cfg.samples)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0.0; range.width()];
            fill_standard_normal(&mut sample_stream(range, cfg.seed, i), &mut row);
            row
        })
        .collect())
}

fn sample_stream(range: &RangeSpec, seed: u64, sample: usize) -> rand_chacha::ChaCha8Rng {
    keyed_stream(seed, range.t_start, range.t_end, sample as u64)
}

/// Entropy of the distribution proportional to `weights`.
pub fn entropy_of_weights(weights: &[f64]) -> Result<f64> {
    if weights.is_empty() {
        return domain("entropy_of_weights: empty weight vector");
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
        return domain(format!("entropy_of_weights: non-positive or non-finite weight {w}"));
    }
    let total: f64 = weights.iter().sum();
    Ok(-weights
        .iter()
        .map(|w| {
            let p = w / total;
            p * p.ln()
        })
        .sum::<f64>())
}

/// Draws `cfg.samples` independent sequences over `range` and estimates
/// `E[Z]`, `E[N]` and `E[H]`.
pub fn estimate_range_stats(range: &RangeSpec, cfg: &McConfig) -> Result<RangeStats> {
    cfg.validate()?;
    let map = LogitMap::new(&cfg.modifier, range);
    let width = range.width();
    let per_sample: Vec<(f64, f64, f64, bool)> = (0..cfg.samples)
        .into_par_iter()
        .map_init(
            || vec![0.0; width],
            |buf, i| {
                fill_standard_normal(&mut sample_stream(range, cfg.seed, i), buf);
                let (mut z, mut n, mut capped) = (0.0, 0.0, false);
                for (offset, &base) in buf.iter().enumerate() {
                    let (logit, hit) = map.apply(offset, base);
                    let w = logit.exp();
                    z += w;
                    n += w * logit;
                    capped |= hit;
                }
                (z, n, -n / z + z.ln(), capped)
            },
        )
        .collect();

    let column = |f: fn(&(f64, f64, f64, bool)) -> f64| per_sample.iter().map(f).collect::<Vec<_>>();
    let (z_mean, z_se) = mean_and_se(&column(|s| s.0));
    let (n_mean, n_se) = mean_and_se(&column(|s| s.1));
    let (h_mean, h_se) = mean_and_se(&column(|s| s.2));
    Ok(RangeStats {
        z_mean,
        z_se,
        n_mean,
        n_se,
        h_mean,
        h_se,
        samples: cfg.samples,
        capped: per_sample.iter().any(|s| s.3),
    })
}

/// Least-squares fits of expected range entropy against `ln t` and `sqrt(ln t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    pub t_grid: Vec<u64>,
    pub h_mean: Vec<f64>,
    pub h_se: Vec<f64>,
    pub slope_logt: f64,
    pub r2_logt: f64,
    pub slope_sqrtlogt: f64,
    pub r2_sqrtlogt: f64,
}

/// Fits already-estimated entropies; `h_se` is carried through untouched.
pub fn fit_entropy_scaling(t_grid: &[u64], h_mean: &[f64], h_se: &[f64]) -> Result<ScalingFit> {
    if t_grid.len() < 4 {
        return domain(format!("scaling fit needs at least 4 grid points, got {}", t_grid.len()));
    }
    if t_grid.iter().any(|&t| t < 1) {
        return domain("scaling fit grid must be positive");
    }
    let log_t: Vec<f64> = t_grid.iter().map(|&t| (t as f64).ln()).collect();
    let sqrt_log_t: Vec<f64> = log_t.iter().map(|v| v.sqrt()).collect();
    let by_log = ols(&log_t, h_mean)?;
    let by_sqrt = ols(&sqrt_log_t, h_mean)?;
    Ok(ScalingFit {
        t_grid: t_grid.to_vec(),
        h_mean: h_mean.to_vec(),
        h_se: h_se.to_vec(),
        slope_logt: by_log.slope,
        r2_logt: by_log.r2,
        slope_sqrtlogt: by_sqrt.slope,
        r2_sqrtlogt: by_sqrt.r2,
    })
}

/// Estimates `E[H]` over `[t, t * delta)` for each `t` in the grid and fits both scalings.
pub fn scaling_fit(t_grid: &[u64], delta: u64, cfg: &McConfig) -> Result<ScalingFit> {
    if t_grid.len() < 4 {
        return domain(format!("scaling fit needs at least 4 grid points, got {}", t_grid.len()));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return domain("t grid must be strictly increasing");
    }
    let mut h_mean = Vec::with_capacity(t_grid.len());
    let mut h_se = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let stats = estimate_range_stats(&RangeSpec::scaled(t, delta)?, cfg)?;
        h_mean.push(stats.h_mean);
        h_se.push(stats.h_se);
    }
    fit_entropy_scaling(t_grid, &h_mean, &h_se)
}

/// `n` integer points log-spaced over `[lo, hi]`, deduplicated.
pub fn log_spaced(lo: u64, hi: u64, n: usize) -> Result<Vec<u64>> {
    if lo < 1 || hi < lo || n < 2 {
        return domain(format!("log_spaced needs 1 <= lo <= hi and n >= 2 (lo={lo}, hi={hi}, n={n})"));
    }
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut grid: Vec<u64> = (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp().round() as u64)
        .collect();
    grid.dedup();
    Ok(grid)
}
