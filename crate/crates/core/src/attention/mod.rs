//! Forward-only dense causal attention for a single head.
//!
//! Pipeline per query `i` and key `j <= i` (distance `t = i - j`):
//! rotate `q`, `k` per the positional scheme, score
//! `S = q . k / sqrt(d)`, map the score through the logit modifier, then
//! take a max-shifted softmax over the visible keys.

pub mod metrics;
pub mod rope;
pub mod tensor;

use crate::error::{domain, Result};
use crate::schedule::{ScheduleParams, ScheduleTable};

pub use metrics::{attention_metrics, distance_metrics, AttentionMetrics, DEFAULT_LOCAL_WINDOW};
pub use rope::{apply_rope, ntk_adjusted_theta, rope_frequencies, PRopeRule, PosScheme};
pub use tensor::Tensor;

/// Default LogN sharpness.
pub const DEFAULT_LOGN_S: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Modifier {
    Identity,
    /// `a_t S + m_t`.
    ScaleInvariant { params: ScheduleParams },
    /// `s ln(N) S` with `N = i + 1` when `per_query`, else the sequence length.
    LogN { s: f64, per_query: bool },
    /// `S - slope(head) t`.
    Alibi { n_heads: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttentionConfig {
    pub pos: PosScheme,
    pub modifier: Modifier,
    pub head_dim: usize,
    pub n_heads: usize,
    pub return_weights: bool,
}

impl AttentionConfig {
    pub fn new(pos: PosScheme, modifier: Modifier, head_dim: usize, n_heads: usize) -> Result<Self> {
        let cfg = Self {
            pos,
            modifier,
            head_dim,
            n_heads,
            return_weights: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.head_dim == 0 || self.head_dim % 2 != 0 {
            return domain(format!("head_dim must be positive and even, got {}", self.head_dim));
        }
        if self.n_heads == 0 {
            return domain("n_heads must be positive");
        }
        match self.modifier {
            Modifier::LogN { s, .. } if !s.is_finite() => domain(format!("LogN s must be finite, got {s}")),
            Modifier::Alibi { n_heads: 0 } => domain("ALiBi n_heads must be positive"),
            _ => Ok(()),
        }
    }

    fn check_head(&self, head_index: usize) -> Result<()> {
        let limit = match self.modifier {
            Modifier::Alibi { n_heads } => n_heads.min(self.n_heads),
            _ => self.n_heads,
        };
        if head_index >= limit {
            return domain(format!("head index {head_index} out of range for {limit} heads"));
        }
        Ok(())
    }
}

/// ALiBi slope `2^(-8 (head_index + 1) / n_heads)`.
pub fn alibi_slope(head_index: usize, n_heads: usize) -> Result<f64> {
    if head_index >= n_heads {
        return domain(format!("head index {head_index} out of range for {n_heads} heads"));
    }
    Ok((-8.0 * (head_index + 1) as f64 / n_heads as f64).exp2())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionOutput {
    pub output: Tensor,
    pub weights: Option<Tensor>,
}

fn check_inputs(q: &Tensor, k: &Tensor, cfg: &AttentionConfig) -> Result<usize> {
    let (n, d) = q.matrix_dims()?;
    let (nk, dk) = k.matrix_dims()?;
    if n != nk || d != dk {
        return domain(format!("Q is {n}x{d} but K is {nk}x{dk}"));
    }
    if d != cfg.head_dim {
        return domain(format!("feature dim {d} does not match head_dim {}", cfg.head_dim));
    }
    if q.has_nan() || k.has_nan() {
        return domain("NaN in attention inputs");
    }
    Ok(n)
}

/// Causal logit matrix `[n x n]`; entries above the diagonal are `-inf`.
pub fn causal_logits(q: &Tensor, k: &Tensor, cfg: &AttentionConfig, head_index: usize) -> Result<Tensor> {
    cfg.validate()?;
    cfg.check_head(head_index)?;
    let n = check_inputs(q, k, cfg)?;
    let freqs = rope_frequencies(&cfg.pos, cfg.head_dim)?;
    let positions: Vec<u64> = (0..n as u64).collect();
    let (q, k) = if matches!(cfg.pos, PosScheme::NoPE) {
        (q.clone(), k.clone())
    } else {
        (apply_rope(q, &positions, &freqs)?, apply_rope(k, &positions, &freqs)?)
    };

    let scale = 1.0 / (cfg.head_dim as f64).sqrt();
    let table = match cfg.modifier {
        Modifier::ScaleInvariant { params } => Some(ScheduleTable::new(&params, 0, n as u64)),
        _ => None,
    };
    let slope = match cfg.modifier {
        Modifier::Alibi { n_heads } => alibi_slope(head_index, n_heads)?,
        _ => 0.0,
    };

    let mut logits = Tensor::new(vec![n, n], vec![f64::NEG_INFINITY; n * n])?;
    for i in 0..n {
        let qi = q.row(i);
        let row = logits.row_mut(i);
        let gain = match cfg.modifier {
            Modifier::LogN { s, per_query } => s * (if per_query { (i + 1) as f64 } else { n as f64 }).ln(),
            _ => 1.0,
        };
        for (j, cell) in row.iter_mut().enumerate().take(i + 1) {
            let score = scale * qi.iter().zip(k.row(j)).map(|(a, b)| a * b).sum::<f64>();
            let t = i - j;
            *cell = match cfg.modifier {
                Modifier::Identity => score,
                Modifier::ScaleInvariant { .. } => table.as_ref().map_or(score, |tb| tb.apply(t, score)),
                Modifier::LogN { .. } => gain * score,
                Modifier::Alibi { .. } => score - slope * t as f64,
            };
        }
    }
    Ok(logits)
}

/// Max-shifted softmax of one row; `-inf` entries get weight exactly 0.
pub fn softmax_row(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = if l == f64::NEG_INFINITY { 0.0 } else { (l - max).exp() };
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// Row-wise softmax of a causal logit matrix.
pub fn masked_softmax(logits: &Tensor) -> Result<Tensor> {
    let (n, _) = logits.matrix_dims()?;
    let mut weights = logits.clone();
    for i in 0..n {
        softmax_row(logits.row(i), weights.row_mut(i));
    }
    Ok(weights)
}

/// Entropy of `softmax(logits)`, evaluated in the log domain.
pub fn softmax_entropy(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut z, mut shifted_mean) = (0.0, 0.0);
    for &l in logits {
        let e = (l - max).exp();
        z += e;
        shifted_mean += e * (l - max);
    }
    z.ln() - shifted_mean / z
}

pub fn causal_attention(
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    cfg: &AttentionConfig,
    head_index: usize,
) -> Result<AttentionOutput> {
    let (n, dv) = v.matrix_dims()?;
    if n != q.matrix_dims()?.0 {
        return domain(format!("V has {n} rows but Q has {}", q.matrix_dims()?.0));
    }
    if v.has_nan() {
        return domain("NaN in attention inputs");
    }
    let weights = masked_softmax(&causal_logits(q, k, cfg, head_index)?)?;
    let mut output = Tensor::zeros(vec![n, dv])?;
    for i in 0..n {
        let w = weights.row(i);
        let out = output.row_mut(i);
        for (j, &wij) in w.iter().enumerate().take(i + 1) {
            for (o, x) in out.iter_mut().zip(v.row(j)) {
                *o += wij * x;
            }
        }
    }
    Ok(AttentionOutput {
        output,
        weights: cfg.return_weights.then_some(weights),
    })
}
