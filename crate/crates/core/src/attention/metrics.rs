//! Per-query summaries of an attention distribution.

use super::tensor::Tensor;
use crate::error::{domain, Result};

pub const DEFAULT_LOCAL_WINDOW: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMetrics {
    pub global_entropy: f64,
    /// Entropy of the renormalised weights on each distance band
    /// `[b_k, b_{k+1})`; NaN when the band holds no mass.
    pub range_entropies: Vec<f64>,
    /// Total weight on the last `local_window` positions, the query itself
    /// included (distances `0..local_window`).
    pub local_mass: f64,
}

fn entropy_of_probabilities<'a>(p: impl Iterator<Item = &'a f64>) -> f64 {
    -p.filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

pub(crate) fn check_boundaries(boundaries: &[u64]) -> Result<()> {
    if boundaries.iter().any(|&b| b < 1) || boundaries.windows(2).any(|w| w[1] <= w[0]) {
        return domain(format!(
            "boundaries must be strictly increasing positive integers, got {boundaries:?}"
        ));
    }
    Ok(())
}

/// Metrics from a probability vector indexed by distance (`by_distance[t]` is
/// the weight on the key `t` tokens back).
pub fn distance_metrics(by_distance: &[f64], boundaries: &[u64], local_window: usize) -> Result<AttentionMetrics> {
    check_boundaries(boundaries)?;
    let global_entropy = entropy_of_probabilities(by_distance.iter());
    let range_entropies = boundaries
        .windows(2)
        .map(|w| {
            let lo = (w[0] as usize).min(by_distance.len());
            let hi = (w[1] as usize).min(by_distance.len());
            let band = &by_distance[lo..hi];
            let mass: f64 = band.iter().sum();
            if mass > 0.0 {
                -band
                    .iter()
                    .filter(|&&x| x > 0.0)
                    .map(|&x| {
                        let p = x / mass;
                        p * p.ln()
                    })
                    .sum::<f64>()
            } else {
                f64::NAN
            }
        })
        .collect();
    let local_mass = by_distance.iter().take(local_window).sum();
    Ok(AttentionMetrics {
        global_entropy,
        range_entropies,
        local_mass,
    })
}

/// Metrics for row `query_index` of a causal weights matrix.
pub fn attention_metrics(
    weights: &Tensor,
    query_index: usize,
    boundaries: &[u64],
    local_window: usize,
) -> Result<AttentionMetrics> {
    let (rows, cols) = weights.matrix_dims()?;
    if query_index >= rows || query_index >= cols {
        return domain(format!("query index {query_index} outside {rows}x{cols} weights"));
    }
    let row = weights.row(query_index);
    let visible = &row[..=query_index];
    let total: f64 = visible.iter().sum();
    if (total - 1.0).abs() > 1e-8 || visible.iter().any(|w| !(*w >= 0.0)) {
        return domain(format!("row {query_index} is not a probability vector (sum {total})"));
    }
    let by_distance: Vec<f64> = visible.iter().rev().copied().collect();
    distance_metrics(&by_distance, boundaries, local_window)
}
