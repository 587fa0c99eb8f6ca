//! Position-dependent logit transform `L_t = a_t * S_t + m_t`.
//!
//! The multiplier `a_t` and shift `m_t` are chosen so that, for standard
//! Gaussian scores, the expected unnormalised attention at distance `t`
//! decays as `alpha / (t / tau + 1)`. Summed over a range `[t, t * delta)`
//! this gives a total that does not depend on `t`:
//!
//! ```text
//! a_t^2 = 2 [ ln(t / tau + 1) - ln(alpha) + beta / alpha ]
//! m_t   = -a_t^2 + beta / alpha
//! ```
//!
//! Fixing `a_0 = 1` and `m_0 = 0` (local tokens untouched) leaves
//! `alpha = beta = e^0.5` and a single lengthscale `tau`.

use crate::error::{domain, Result};

/// The multiplicative constant `alpha = beta` produced by the boundary condition.
pub const RESOLVED_ALPHA: f64 = 1.648_721_270_700_128_2; // e^0.5

/// Default lengthscale in tokens.
pub const DEFAULT_TAU: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleParams {
    alpha: f64,
    beta: f64,
    tau: f64,
    /// `2 (beta / alpha - ln alpha)`, i.e. `a_0^2`.
    base_variance: f64,
}

impl ScheduleParams {
    /// Builds a parameter set, checking positivity and `beta >= alpha ln(alpha)`
    /// (which keeps `a_t^2 >= 0` for every `t >= 0`).
    pub fn new(alpha: f64, beta: f64, tau: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && tau > 0.0) || !(alpha * beta * tau).is_finite() {
            return domain(format!(
                "schedule parameters must be positive and finite (alpha={alpha}, beta={beta}, tau={tau})"
            ));
        }
        if beta < alpha * alpha.ln() {
            return domain(format!(
                "beta={beta} violates beta >= alpha ln(alpha) = {}",
                alpha * alpha.ln()
            ));
        }
        let base_variance = 2.0 * (beta / alpha - alpha.ln());
        Ok(Self {
            alpha,
            beta,
            tau,
            base_variance,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

/// Resolves `alpha = beta = e^0.5` from the boundary condition `a_0^2 = 1, m_0 = 0`.
pub fn resolve_params(tau: f64) -> Result<ScheduleParams> {
    if !(tau > 0.0) || !tau.is_finite() {
        return domain(format!("tau must be positive and finite, got {tau}"));
    }
    let mut params = ScheduleParams::new(RESOLVED_ALPHA, RESOLVED_ALPHA, tau)?;
    // ln(e^0.5) is not exactly 0.5 in floating point; pin a_0^2 = 1.
    params.base_variance = 1.0;
    Ok(params)
}

/// Multiplier and shift at a single token distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulePoint {
    pub t: u64,
    /// Standard-deviation multiplier `a_t`.
    pub a: f64,
    /// `a_t^2`, kept to avoid re-squaring `a`.
    pub a2: f64,
    /// Additive shift `m_t`.
    pub m: f64,
}

pub fn schedule_at(t: u64, params: &ScheduleParams) -> SchedulePoint {
    let a2 = (2.0 * (t as f64 / params.tau).ln_1p() + params.base_variance).max(0.0);
    let m = params.beta / params.alpha - a2;
    SchedulePoint {
        t,
        a: a2.sqrt(),
        a2,
        m,
    }
}

/// `a_t * score + m_t`.
pub fn transform_logit(score: f64, t: u64, params: &ScheduleParams) -> f64 {
    let p = schedule_at(t, params);
    p.a * score + p.m
}

/// Precomputed `(a_t, m_t)` for a contiguous block of distances.
#[derive(Debug, Clone)]
pub struct ScheduleTable {
    t_start: u64,
    a: Vec<f64>,
    m: Vec<f64>,
}

impl ScheduleTable {
    pub fn new(params: &ScheduleParams, t_start: u64, t_end: u64) -> Self {
        let (a, m) = (t_start..t_end)
            .map(|t| {
                let p = schedule_at(t, params);
                (p.a, p.m)
            })
            .unzip();
        Self { t_start, a, m }
    }

    pub fn t_start(&self) -> u64 {
        self.t_start
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// Transform for the `offset`-th distance in the table.
    #[inline]
    pub fn apply(&self, offset: usize, score: f64) -> f64 {
        self.a[offset] * score + self.m[offset]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn resolved() -> ScheduleParams {
        resolve_params(10.0).unwrap()
    }

    #[test]
    fn resolve_gives_sqrt_e() {
        let p = resolved();
        assert_relative_eq!(p.alpha(), 0.5f64.exp(), max_relative = 1e-15);
        assert_relative_eq!(p.beta(), 0.5f64.exp(), max_relative = 1e-15);
        assert_eq!(p.tau(), 10.0);
        // beta - alpha ln alpha = e^0.5 (1 - 0.5)
        assert_relative_eq!(
            p.beta() - p.alpha() * p.alpha().ln(),
            0.5 * 0.5f64.exp(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn resolve_rejects_nonpositive_tau() {
        assert!(resolve_params(0.0).is_err());
        assert!(resolve_params(-1.0).is_err());
        assert!(resolve_params(f64::NAN).is_err());
    }

    #[test]
    fn new_rejects_invalid() {
        assert!(ScheduleParams::new(0.0, 1.0, 1.0).is_err());
        assert!(ScheduleParams::new(1.0, 1.0, 0.0).is_err());
        // alpha = e^2: alpha ln alpha = 2 e^2 > beta = 1
        assert!(ScheduleParams::new(2f64.exp(), 1.0, 1.0).is_err());
        assert!(ScheduleParams::new(2.0, 3.0, 5.0).is_ok());
    }

    #[test]
    fn boundary_condition_exact() {
        for tau in [1.0, 10.0, 100.0, 0.01] {
            let p = schedule_at(0, &resolve_params(tau).unwrap());
            assert_eq!(p.a, 1.0);
            assert_eq!(p.a2, 1.0);
            assert_eq!(p.m, 0.0);
        }
    }

    #[test]
    fn schedule_values() {
        let p = schedule_at(10, &resolved());
        assert_relative_eq!(p.a2, 1.0 + 2.0 * 2f64.ln(), max_relative = 1e-14);
        assert_relative_eq!(p.a2, 2.386_294_361_119_890_6, max_relative = 1e-14);
        assert_relative_eq!(p.m, -1.386_294_361_119_890_6, max_relative = 1e-14);

        let p = schedule_at(90, &resolved());
        assert_relative_eq!(p.a2, 5.605_170_185_988_091, max_relative = 1e-14);
        assert_relative_eq!(p.m, -4.605_170_185_988_091, max_relative = 1e-14);
    }

    #[test]
    fn generic_params_follow_closed_form() {
        let params = ScheduleParams::new(2.0, 3.0, 7.0).unwrap();
        let t = 33;
        let p = schedule_at(t, &params);
        let a2 = 2.0 * ((t as f64 / 7.0 + 1.0).ln() - 2f64.ln() + 1.5);
        assert_relative_eq!(p.a2, a2, max_relative = 1e-14);
        assert_relative_eq!(p.m, -a2 + 1.5, max_relative = 1e-14);
    }

    #[test]
    fn transform_examples() {
        let params = resolved();
        assert_eq!(transform_logit(0.731, 0, &params), 0.731);
        assert_relative_eq!(
            transform_logit(0.0, 90, &params),
            -4.605_170_185_988_091,
            max_relative = 1e-14
        );
        let expected = 2.386_294_361_119_890_6f64.sqrt() - 1.386_294_361_119_890_6;
        assert_relative_eq!(transform_logit(1.0, 10, &params), expected, max_relative = 1e-13);
        assert_relative_eq!(expected, 0.158_469, epsilon = 1e-6);
    }

    #[test]
    fn table_matches_pointwise() {
        let params = resolved();
        let table = ScheduleTable::new(&params, 5, 50);
        assert_eq!(table.len(), 45);
        for (i, t) in (5..50u64).enumerate() {
            assert_eq!(table.apply(i, 0.3), transform_logit(0.3, t, &params));
        }
    }

    proptest! {
        #[test]
        fn monotone_in_t(t in 0u64..10_000_000, tau in 0.01f64..1000.0) {
            let params = resolve_params(tau).unwrap();
            let p0 = schedule_at(t, &params);
            let p1 = schedule_at(t + 1, &params);
            prop_assert!(p0.a2 >= 0.0);
            prop_assert!(p1.a2 >= p0.a2);
            prop_assert!(p1.m <= p0.m);
        }

        #[test]
        fn shift_plus_variance_is_ratio(t in 0u64..10_000_000, tau in 0.01f64..1000.0) {
            let p = schedule_at(t, &resolve_params(tau).unwrap());
            prop_assert!((p.m + p.a2 - 1.0).abs() <= 1e-14 * p.a2.max(1.0));
        }

        #[test]
        fn transform_preserves_order(s1 in -50.0f64..50.0, ds in 1e-6f64..10.0, t in 0u64..1_000_000) {
            let params = resolved();
            prop_assert!(transform_logit(s1, t, &params) < transform_logit(s1 + ds, t, &params));
        }
    }
}
