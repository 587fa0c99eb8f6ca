//! Rotary position embeddings and their long-context variants.

use super::tensor::Tensor;
use crate::error::{domain, Result};

/// Default RoPE base.
pub const DEFAULT_THETA: f64 = 10_000.0;
/// Default p-RoPE effective base.
pub const DEFAULT_EFFECTIVE_BASE: f64 = 1024.0;

/// How p-RoPE derives its spectrum from the effective base.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PRopeRule {
    /// Leave pairs with `omega < 1 / effective_base` unrotated.
    #[default]
    Truncate,
    /// Use the RoPE spectrum with base `effective_base` instead of `theta`.
    Rebase,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PosScheme {
    NoPE,
    RoPE {
        theta: f64,
    },
    PRoPE {
        theta: f64,
        effective_base: f64,
        rule: PRopeRule,
    },
    /// RoPE with the base enlarged for inference beyond the training length.
    Ntk {
        theta: f64,
        train_len: u64,
        infer_len: u64,
    },
}

impl PosScheme {
    fn validate(&self) -> Result<()> {
        let (theta, base) = match *self {
            PosScheme::NoPE => return Ok(()),
            PosScheme::RoPE { theta } => (theta, None),
            PosScheme::PRoPE {
                theta,
                effective_base,
                ..
            } => (theta, Some(effective_base)),
            PosScheme::Ntk {
                theta,
                train_len,
                infer_len,
            } => {
                if train_len == 0 || infer_len == 0 {
                    return domain("NTK lengths must be positive");
                }
                (theta, None)
            }
        };
        if !(theta > 1.0) || !theta.is_finite() {
            return domain(format!("RoPE theta must exceed 1, got {theta}"));
        }
        if let Some(b) = base {
            if !(b > 1.0) || !b.is_finite() {
                return domain(format!("p-RoPE effective base must exceed 1, got {b}"));
            }
        }
        Ok(())
    }
}

/// `theta * (infer_len / train_len)^(d / (d - 2))`, or `theta` when not extrapolating.
pub fn ntk_adjusted_theta(theta: f64, train_len: u64, infer_len: u64, head_dim: usize) -> Result<f64> {
    if head_dim < 4 {
        return domain(format!("NTK scaling needs head_dim >= 4, got {head_dim}"));
    }
    if train_len == 0 || infer_len == 0 {
        return domain("NTK lengths must be positive");
    }
    if infer_len <= train_len {
        return Ok(theta);
    }
    let d = head_dim as f64;
    Ok(theta * (infer_len as f64 / train_len as f64).powf(d / (d - 2.0)))
}

fn spectrum(base: f64, head_dim: usize) -> Vec<f64> {
    let d = head_dim as f64;
    (0..head_dim / 2)
        .map(|k| base.powf(-2.0 * k as f64 / d))
        .collect()
}

/// Angular frequency per feature pair, `head_dim / 2` entries.
pub fn rope_frequencies(scheme: &PosScheme, head_dim: usize) -> Result<Vec<f64>> {
    if head_dim == 0 || head_dim % 2 != 0 {
        return domain(format!("head_dim must be positive and even, got {head_dim}"));
    }
    scheme.validate()?;
    Ok(match *scheme {
        PosScheme::NoPE => vec![0.0; head_dim / 2],
        PosScheme::RoPE { theta } => spectrum(theta, head_dim),
        PosScheme::PRoPE {
            theta,
            effective_base,
            rule,
        } => match rule {
            PRopeRule::Truncate => {
                let cutoff = 1.0 / effective_base;
                spectrum(theta, head_dim)
                    .into_iter()
                    .map(|w| if w < cutoff { 0.0 } else { w })
                    .collect()
            }
            PRopeRule::Rebase => spectrum(effective_base, head_dim),
        },
        PosScheme::Ntk {
            theta,
            train_len,
            infer_len,
        } => spectrum(ntk_adjusted_theta(theta, train_len, infer_len, head_dim)?, head_dim),
    })
}

/// Rotates each feature pair `(x[2k], x[2k+1])` of row `i` by `positions[i] * freqs[k]`.
pub fn apply_rope(x: &Tensor, positions: &[u64], freqs: &[f64]) -> Result<Tensor> {
    let (seq, dim) = x.matrix_dims()?;
    if positions.len() != seq {
        return domain(format!("{} positions for {seq} rows", positions.len()));
    }
    if dim % 2 != 0 || freqs.len() != dim / 2 {
        return domain(format!("{} frequencies for head_dim {dim}", freqs.len()));
    }
    let mut out = x.clone();
    for (i, &pos) in positions.iter().enumerate() {
        let row = out.row_mut(i);
        for (pair, &w) in row.chunks_exact_mut(2).zip(freqs) {
            if w == 0.0 {
                continue;
            }
            let (sin, cos) = (pos as f64 * w).sin_cos();
            let (x0, x1) = (pair[0], pair[1]);
            pair[0] = x0 * cos - x1 * sin;
            pair[1] = x0 * sin + x1 * cos;
        }
    }
    Ok(out)
}
