//! Closed-form oracles for the schedule.
//!
//! For `X ~ N(mu, sigma^2)`, `E[X^k e^{cX}] = e^{c^2 sigma^2 / 2 + c mu} E[Y^k]`
//! with `Y ~ N(mu + c sigma^2, sigma^2)`. With `X = L_t` this yields the
//! expected unnormalised attention (`k = 0, c = 1`) and the expected
//! `A ln A` term (`k = 1, c = 1`) at each distance.

use crate::error::{domain, Result};
use crate::schedule::{schedule_at, ScheduleParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianParams {
    pub mu: f64,
    pub sigma2: f64,
}

impl GaussianParams {
    pub fn new(mu: f64, sigma2: f64) -> Result<Self> {
        if !(sigma2 >= 0.0) || !mu.is_finite() || !sigma2.is_finite() {
            return domain(format!("invalid Gaussian (mu={mu}, sigma2={sigma2})"));
        }
        Ok(Self { mu, sigma2 })
    }
}

/// `E[X^k e^{cX}]` for `k` in `{0, 1, 2}`.
pub fn gaussian_exp_moment(g: GaussianParams, k: u32, c: f64) -> Result<f64> {
    let GaussianParams { mu, sigma2 } = g;
    let scale = (0.5 * c * c * sigma2 + c * mu).exp();
    let tilted_mean = mu + c * sigma2;
    let raw = match k {
        0 => 1.0,
        1 => tilted_mean,
        2 => tilted_mean * tilted_mean + sigma2,
        _ => return domain(format!("moment order k={k} not supported (k in 0..=2)")),
    };
    Ok(raw * scale)
}

/// The Gaussian law of the transformed logit `a_t Z + m_t` with `Z ~ N(0, 1)`.
pub fn logit_law(t: u64, params: &ScheduleParams) -> GaussianParams {
    let p = schedule_at(t, params);
    GaussianParams {
        mu: p.m,
        sigma2: p.a2,
    }
}

/// `E[A_t] = alpha / (t / tau + 1)`.
pub fn expected_unnorm_attention(t: u64, params: &ScheduleParams) -> f64 {
    params.alpha() / (t as f64 / params.tau() + 1.0)
}

/// `E[A_t ln A_t] = beta / (t / tau + 1)`.
pub fn expected_negentropy_term(t: u64, params: &ScheduleParams) -> f64 {
    params.beta() / (t as f64 / params.tau() + 1.0)
}

/// Bounds `(ln((b+1)/a), ln(b/(a-1)))` on `sum_{k=a}^{b} 1/k`.
pub fn harmonic_bounds(a: u64, b: u64) -> Result<(f64, f64)> {
    if a < 2 {
        return domain(format!("harmonic_bounds needs a >= 2, got a={a}"));
    }
    if b < a {
        return domain(format!("harmonic_bounds needs a <= b, got a={a}, b={b}"));
    }
    // ln_1p keeps precision when the ratios are close to one.
    let (af, span) = (a as f64, (b - a + 1) as f64);
    Ok(((span / af).ln_1p(), (span / (af - 1.0)).ln_1p()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RangeQuantity {
    Total,
    Negentropy,
}

/// Large-`t` limit of the expected range sums over `[t, t * delta)`:
/// `alpha tau ln(delta)` for the total, `beta tau ln(delta)` for the negentropy.
pub fn range_asymptote(delta: u64, params: &ScheduleParams, which: RangeQuantity) -> Result<f64> {
    if delta < 2 {
        return domain(format!("range_asymptote needs delta >= 2, got {delta}"));
    }
    let constant = match which {
        RangeQuantity::Total => params.alpha(),
        RangeQuantity::Negentropy => params.beta(),
    };
    Ok(constant * params.tau() * (delta as f64).ln())
}

/// Exact expected range sums `(sum E[A_t], sum E[A_t ln A_t])` over `[t_start, t_end)`.
pub fn expected_range_sums(t_start: u64, t_end: u64, params: &ScheduleParams) -> (f64, f64) {
    // Smallest terms first.
    (t_start..t_end).rev().fold((0.0, 0.0), |(z, n), t| {
        (
            z + expected_unnorm_attention(t, params),
            n + expected_negentropy_term(t, params),
        )
    })
}
