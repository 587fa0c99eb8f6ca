//! The reproducible studies: range-sum convergence, synthetic long-context
//! attention metrics and entropy scaling.
//!
//! Every report is a pure function of its inputs and seed.

pub mod report;
pub mod svg;

use rayon::prelude::*;

use crate::attention::{metrics::check_boundaries, softmax_entropy};
use crate::error::{domain, Result};
use crate::mclab::{
    estimate_range_stats, fit_entropy_scaling, mean_and_se, qq_points, McConfig, McModifier, RangeSpec,
};
use crate::moments::{expected_range_sums, expected_unnorm_attention, range_asymptote, RangeQuantity};
use crate::rng::{fill_standard_normal, keyed_stream};
use crate::schedule::{schedule_at, ScheduleParams, ScheduleTable};

pub use report::{format_float, Cell, ExperimentReport, ReportKind};
pub use svg::{LineChart, Series};

/// Context lengths 512, 1024, ..., 65536.
pub fn default_context_lengths() -> Vec<u64> {
    (9..=16).map(|p| 1u64 << p).collect()
}

pub const DEFAULT_DELTAS: [u64; 3] = [2, 5, 10];
pub const DEFAULT_BOUNDARIES: [u64; 4] = [10, 100, 1000, 10_000];

/// Mean and standard error of a set of values fed in a fixed order.
fn summarise(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    mean_and_se(&v)
}

fn add_schedule_meta(report: &mut ExperimentReport, params: &ScheduleParams) {
    report.add_meta("alpha", params.alpha());
    report.add_meta("beta", params.beta());
    report.add_meta("tau", params.tau());
}

/// `(t, a_t, m_t, E[A_t])` for `t = 0..=t_max`.
pub fn schedule_table(params: &ScheduleParams, t_max: u64) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new(ReportKind::Schedule, &["t", "a_t", "m_t", "expected_attention"]);
    add_schedule_meta(&mut report, params);
    for t in 0..=t_max {
        let p = schedule_at(t, params);
        report.push_row(vec![
            t.into(),
            p.a.into(),
            p.m.into(),
            expected_unnorm_attention(t, params).into(),
        ])?;
    }
    Ok(report)
}

/// Monte Carlo range sums against their closed forms and large-`t` limits.
pub fn run_theorem1(
    params: &ScheduleParams,
    deltas: &[u64],
    t_grid: &[u64],
    samples: usize,
    seed: u64,
) -> Result<ExperimentReport> {
    if t_grid.is_empty() || deltas.is_empty() {
        return domain("theorem1 needs a non-empty t grid and delta list");
    }
    let cfg = McConfig::new(samples, seed, McModifier::Schedule(*params))?;
    let mut report = ExperimentReport::new(
        ReportKind::Theorem1,
        &[
            "t", "delta", "z_mean", "z_se", "n_mean", "n_se", "z_exact", "n_exact", "z_asymptote",
            "n_asymptote", "pass",
        ],
    );
    report.add_meta("seed", seed);
    report.add_meta("samples", samples as u64);
    add_schedule_meta(&mut report, params);
    for &delta in deltas {
        for &t in t_grid {
            let range = RangeSpec::scaled(t, delta)?;
            let stats = estimate_range_stats(&range, &cfg)?;
            let (z_exact, n_exact) = expected_range_sums(range.t_start(), range.t_end(), params);
            let pass = (stats.z_mean - z_exact).abs() <= 3.0 * stats.z_se
                && (stats.n_mean - n_exact).abs() <= 3.0 * stats.n_se;
            report.push_row(vec![
                t.into(),
                delta.into(),
                stats.z_mean.into(),
                stats.z_se.into(),
                stats.n_mean.into(),
                stats.n_se.into(),
                z_exact.into(),
                n_exact.into(),
                range_asymptote(delta, params, RangeQuantity::Total)?.into(),
                range_asymptote(delta, params, RangeQuantity::Negentropy)?.into(),
                pass.into(),
            ])?;
        }
    }
    Ok(report)
}

/// Logit schemes for the synthetic long-context comparison. The LogN
/// arm uses the context length as `N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fig1Scheme {
    Identity,
    LogN { s: f64 },
    ScaleInvariant(ScheduleParams),
}

impl Fig1Scheme {
    pub fn label(&self) -> &'static str {
        match self {
            Fig1Scheme::Identity => "identity",
            Fig1Scheme::LogN { .. } => "logn",
            Fig1Scheme::ScaleInvariant(_) => "scale-invariant",
        }
    }
}

/// Per-sample metrics of the final query over `len` IID logits.
struct Fig1Sample {
    global_entropy: f64,
    local_mass: f64,
    range_entropies: Vec<f64>,
}

fn fig1_sample(
    base: &mut [f64],
    scheme: &Fig1Scheme,
    table: Option<&ScheduleTable>,
    boundaries: &[u64],
    local_window: usize,
) -> Fig1Sample {
    let len = base.len();
    // base[t] is the logit of the key t tokens back.
    match scheme {
        Fig1Scheme::Identity => {}
        Fig1Scheme::LogN { s } => {
            let gain = s * (len as f64).ln();
            base.iter_mut().for_each(|l| *l *= gain);
        }
        Fig1Scheme::ScaleInvariant(_) => {
            let table = table.expect("schedule table");
            base.iter_mut().enumerate().for_each(|(t, l)| *l = table.apply(t, *l));
        }
    }
    let max = base.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut total, mut local) = (0.0, 0.0);
    for (t, &l) in base.iter().enumerate() {
        let w = (l - max).exp();
        total += w;
        if t < local_window {
            local += w;
        }
    }
    let range_entropies = boundaries
        .windows(2)
        .map(|w| {
            let lo = (w[0] as usize).min(len);
            let hi = (w[1] as usize).min(len);
            if lo < hi {
                softmax_entropy(&base[lo..hi])
            } else {
                f64::NAN
            }
        })
        .collect();
    Fig1Sample {
        global_entropy: softmax_entropy(base),
        local_mass: local / total,
        range_entropies,
    }
}

/// Attention metrics for the last query of `T` IID standard normal logits,
/// per context length and scheme. All schemes see the same base logits.
pub fn run_fig1(
    context_lengths: &[u64],
    schemes: &[Fig1Scheme],
    samples: usize,
    seed: u64,
    boundaries: &[u64],
    local_window: usize,
) -> Result<ExperimentReport> {
    if context_lengths.is_empty() || schemes.is_empty() {
        return domain("fig1 needs at least one context length and one scheme");
    }
    if context_lengths.iter().any(|&t| t < 1) {
        return domain("context lengths must be positive");
    }
    if samples < 2 {
        return domain(format!("need at least 2 samples, got {samples}"));
    }
    if local_window < 1 {
        return domain("local window must be positive");
    }
    check_boundaries(boundaries)?;

    let mut columns: Vec<String> = [
        "scheme",
        "length",
        "global_entropy",
        "global_entropy_se",
        "local_mass",
        "local_mass_se",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for w in boundaries.windows(2) {
        columns.push(format!("range_entropy_{}_{}", w[0], w[1]));
    }
    let mut report = ExperimentReport::with_columns(ReportKind::Fig1, columns);
    report.add_meta("seed", seed);
    report.add_meta("samples", samples as u64);
    report.add_meta("local_window", local_window as u64);
    for scheme in schemes {
        match scheme {
            Fig1Scheme::Identity => {}
            Fig1Scheme::LogN { s } => report.add_meta("logn_s", *s),
            Fig1Scheme::ScaleInvariant(p) => add_schedule_meta(&mut report, p),
        }
    }

    for &len in context_lengths {
        for scheme in schemes {
            let table = match scheme {
                Fig1Scheme::ScaleInvariant(p) => Some(ScheduleTable::new(p, 0, len)),
                _ => None,
            };
            let per_sample: Vec<Fig1Sample> = (0..samples)
                .into_par_iter()
                .map_init(
                    || vec![0.0; len as usize],
                    |buf, i| {
                        // Range key (0, len) is outside RangeSpec's domain, so
                        // these streams never collide with range samples.
                        fill_standard_normal(&mut keyed_stream(seed, 0, len, i as u64), buf);
                        fig1_sample(buf, scheme, table.as_ref(), boundaries, local_window)
                    },
                )
                .collect();
            let (h, h_se) = summarise(per_sample.iter().map(|s| s.global_entropy));
            let (m, m_se) = summarise(per_sample.iter().map(|s| s.local_mass));
            let mut row = vec![scheme.label().into(), len.into(), h.into(), h_se.into(), m.into(), m_se.into()];
            for k in 0..boundaries.len().saturating_sub(1) {
                row.push(summarise(per_sample.iter().map(|s| s.range_entropies[k])).0.into());
            }
            report.push_row(row)?;
        }
    }
    Ok(report)
}

/// Expected range entropy over `[t, t * delta)` for each arm, delta and `t`,
/// with least-squares fits against `ln t` and `sqrt(ln t)` per (arm, delta).
pub fn run_fig2(
    deltas: &[u64],
    t_grid: &[u64],
    arms: &[McModifier],
    samples: usize,
    seed: u64,
) -> Result<ExperimentReport> {
    if t_grid.len() < 4 {
        return domain(format!("fig2 needs at least 4 grid points, got {}", t_grid.len()));
    }
    if deltas.is_empty() || arms.is_empty() {
        return domain("fig2 needs at least one delta and one arm");
    }
    let mut report = ExperimentReport::new(
        ReportKind::Fig2,
        &[
            "arm", "delta", "t", "h_mean", "h_se", "slope_logt", "r2_logt", "slope_sqrtlogt", "r2_sqrtlogt",
        ],
    );
    report.add_meta("seed", seed);
    report.add_meta("samples", samples as u64);
    for arm in arms {
        match arm {
            McModifier::Schedule(p) => add_schedule_meta(&mut report, p),
            McModifier::LogN { s, n } => {
                report.add_meta("logn_s", *s);
                report.add_meta("logn_n", *n);
            }
            McModifier::Identity => {}
        }
    }
    for arm in arms {
        let cfg = McConfig::new(samples, seed, *arm)?;
        for &delta in deltas {
            let mut h_mean = Vec::with_capacity(t_grid.len());
            let mut h_se = Vec::with_capacity(t_grid.len());
            for &t in t_grid {
                let stats = estimate_range_stats(&RangeSpec::scaled(t, delta)?, &cfg)?;
                h_mean.push(stats.h_mean);
                h_se.push(stats.h_se);
            }
            let fit = fit_entropy_scaling(t_grid, &h_mean, &h_se)?;
            for (i, &t) in t_grid.iter().enumerate() {
                report.push_row(vec![
                    arm.label().into(),
                    delta.into(),
                    t.into(),
                    h_mean[i].into(),
                    h_se[i].into(),
                    fit.slope_logt.into(),
                    fit.r2_logt.into(),
                    fit.slope_sqrtlogt.into(),
                    fit.r2_sqrtlogt.into(),
                ])?;
            }
        }
    }
    Ok(report)
}

/// QQ points of a sample against the standard normal.
pub fn run_qq(sample: &[f64], n_quantiles: usize) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new(ReportKind::Qq, &["p", "theoretical", "empirical"]);
    report.add_meta("sample_size", sample.len() as u64);
    report.add_meta("quantiles", n_quantiles as u64);
    for (i, (x, y)) in qq_points(sample, n_quantiles)?.into_iter().enumerate() {
        let p = (i as f64 + 0.5) / n_quantiles as f64;
        report.push_row(vec![p.into(), x.into(), y.into()])?;
    }
    Ok(report)
}

fn text_cells(report: &ExperimentReport, name: &str) -> Vec<String> {
    report
        .column(name)
        .unwrap_or_default()
        .into_iter()
        .map(|c| match c {
            Cell::Text(s) => s.clone(),
            other => other.as_f64().map(format_float).unwrap_or_default(),
        })
        .collect()
}

/// Groups `(x, y)` pairs of a report by the values of `key_columns`.
fn grouped_series(report: &ExperimentReport, key_columns: &[&str], x: &str, y: &str) -> Vec<Series> {
    let keys: Vec<Vec<String>> = key_columns.iter().map(|k| text_cells(report, k)).collect();
    let xs = report.numeric_column(x).unwrap_or_default();
    let ys = report.numeric_column(y).unwrap_or_default();
    let mut series: Vec<Series> = Vec::new();
    for i in 0..xs.len().min(ys.len()) {
        let name = key_columns
            .iter()
            .zip(&keys)
            .map(|(k, v)| format!("{k}={}", v[i]))
            .collect::<Vec<_>>()
            .join(" ");
        match series.iter_mut().find(|s| s.name == name) {
            Some(s) => s.points.push((xs[i], ys[i])),
            None => series.push(Series {
                name,
                points: vec![(xs[i], ys[i])],
            }),
        }
    }
    series
}

/// Convenience chart for a fig1 or fig2 report.
pub fn chart_for(report: &ExperimentReport) -> Option<LineChart> {
    match report.kind {
        ReportKind::Fig1 => Some(LineChart {
            title: "Attention on the last local window".into(),
            x_label: "context length".into(),
            y_label: "local mass".into(),
            log_x: true,
            series: grouped_series(report, &["scheme"], "length", "local_mass"),
        }),
        ReportKind::Fig2 => Some(LineChart {
            title: "Expected range entropy".into(),
            x_label: "t".into(),
            y_label: "E[H over [t, t delta)]".into(),
            log_x: true,
            series: grouped_series(report, &["arm", "delta"], "t", "h_mean"),
        }),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::resolve_params;
    use approx::assert_relative_eq;

    #[test]
    fn schedule_report_rows() {
        let report = schedule_table(&resolve_params(10.0).unwrap(), 3).unwrap();
        let csv = report.to_csv();
        assert!(csv.contains("\nt,a_t,m_t,expected_attention\n0,1,0,1.64872127\n"));
        assert_eq!(report.rows().len(), 4);
    }

    #[test]
    fn theorem1_rows_and_errors() {
        let params = resolve_params(10.0).unwrap();
        let r = run_theorem1(&params, &[2, 10], &[20, 40], 64, 0).unwrap();
        assert_eq!(r.rows().len(), 4);
        let asym = r.numeric_column("z_asymptote").unwrap();
        assert_relative_eq!(asym[0], 11.428_065_003_150_044, max_relative = 1e-12);
        assert_relative_eq!(asym[2], 37.963_210_204_163_17, max_relative = 1e-12);
        assert!(run_theorem1(&params, &[2], &[], 64, 0).is_err());
        assert_eq!(r.meta_value("seed"), Some("0"));
    }

    #[test]
    fn fig1_single_token() {
        let params = resolve_params(10.0).unwrap();
        let schemes = [
            Fig1Scheme::Identity,
            Fig1Scheme::LogN { s: 0.4 },
            Fig1Scheme::ScaleInvariant(params),
        ];
        let r = run_fig1(&[1], &schemes, 8, 0, &DEFAULT_BOUNDARIES, 100).unwrap();
        assert_eq!(r.numeric_column("global_entropy").unwrap(), vec![0.0; 3]);
        assert_eq!(r.numeric_column("local_mass").unwrap(), vec![1.0; 3]);
        assert!(r.numeric_column("range_entropy_10_100").unwrap()[0].is_nan());
    }

    #[test]
    fn fig1_small_ordering() {
        let params = resolve_params(10.0).unwrap();
        let schemes = [Fig1Scheme::Identity, Fig1Scheme::ScaleInvariant(params)];
        let r = run_fig1(&[4096], &schemes, 32, 1, &DEFAULT_BOUNDARIES, 100).unwrap();
        let h = r.numeric_column("global_entropy").unwrap();
        let m = r.numeric_column("local_mass").unwrap();
        assert!(h[0] > h[1]);
        assert!(m[1] > m[0]);
    }

    #[test]
    fn fig2_minimal_grid() {
        let params = resolve_params(10.0).unwrap();
        let r = run_fig2(&[2], &[10, 20, 40, 80], &[McModifier::Schedule(params)], 16, 0).unwrap();
        assert_eq!(r.rows().len(), 4);
        assert!(run_fig2(&[2], &[10, 20, 40], &[McModifier::Identity], 16, 0).is_err());
        let chart = chart_for(&r).unwrap();
        assert_eq!(chart.series.len(), 1);
        assert_eq!(chart.series[0].points.len(), 4);
    }

    #[test]
    fn qq_report() {
        let sample: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let r = run_qq(&sample, 10).unwrap();
        assert_eq!(r.rows().len(), 10);
        assert!(run_qq(&sample[..5], 10).is_err());
    }
}
