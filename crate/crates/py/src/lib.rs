//! Python bindings for `siattn`.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use siattn::attention::metrics::{attention_metrics, DEFAULT_LOCAL_WINDOW};
use siattn::attention::rope::{PRopeRule, PosScheme, DEFAULT_EFFECTIVE_BASE, DEFAULT_THETA};
use siattn::attention::tensor::Tensor;
use siattn::attention::{causal_attention, AttentionConfig, Modifier, DEFAULT_LOGN_S};
use siattn::experiments::{self, Fig1Scheme, DEFAULT_BOUNDARIES};
use siattn::mclab::{self, McConfig, McModifier, RangeSpec};
use siattn::moments::{self, RangeQuantity};
use siattn::schedule::DEFAULT_TAU;

fn to_py(err: siattn::Error) -> PyErr {
    match err {
        siattn::Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Schedule parameters `(alpha, beta, tau)`.
#[pyclass(name = "ScheduleParams", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyScheduleParams {
    inner: siattn::ScheduleParams,
}

#[pymethods]
impl PyScheduleParams {
    #[new]
    fn new(alpha: f64, beta: f64, tau: f64) -> PyResult<Self> {
        let inner = siattn::ScheduleParams::new(alpha, beta, tau).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha()
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta()
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.inner.tau()
    }

    fn __repr__(&self) -> String {
        format!(
            "ScheduleParams(alpha={}, beta={}, tau={})",
            self.inner.alpha(),
            self.inner.beta(),
            self.inner.tau()
        )
    }
}

#[pyfunction]
#[pyo3(signature = (tau = DEFAULT_TAU))]
fn resolve_params(tau: f64) -> PyResult<PyScheduleParams> {
    let inner = siattn::resolve_params(tau).map_err(to_py)?;
    Ok(PyScheduleParams { inner })
}

/// Returns `(a_t, a_t^2, m_t)`.
#[pyfunction]
fn schedule_at(t: u64, params: &PyScheduleParams) -> (f64, f64, f64) {
    let p = siattn::schedule_at(t, &params.inner);
    (p.a, p.a2, p.m)
}

#[pyfunction]
fn transform_logit(score: f64, t: u64, params: &PyScheduleParams) -> f64 {
    siattn::transform_logit(score, t, &params.inner)
}

#[pyfunction]
fn gaussian_exp_moment(mu: f64, sigma2: f64, k: u32, c: f64) -> PyResult<f64> {
    let g = moments::GaussianParams::new(mu, sigma2).map_err(to_py)?;
    moments::gaussian_exp_moment(g, k, c).map_err(to_py)
}

#[pyfunction]
fn harmonic_bounds(a: u64, b: u64) -> PyResult<(f64, f64)> {
    moments::harmonic_bounds(a, b).map_err(to_py)
}

/// `which` is `"total"` or `"negentropy"`.
#[pyfunction]
#[pyo3(signature = (delta, params, which = "total"))]
fn range_asymptote(delta: u64, params: &PyScheduleParams, which: &str) -> PyResult<f64> {
    let which = match which {
        "total" => RangeQuantity::Total,
        "negentropy" => RangeQuantity::Negentropy,
        other => return Err(PyValueError::new_err(format!("unknown quantity {other:?}"))),
    };
    moments::range_asymptote(delta, &params.inner, which).map_err(to_py)
}

/// Exact `(sum E[A_t], sum E[A_t ln A_t])` over `[t_start, t_end)`.
#[pyfunction]
fn expected_range_sums(t_start: u64, t_end: u64, params: &PyScheduleParams) -> (f64, f64) {
    moments::expected_range_sums(t_start, t_end, &params.inner)
}

fn mc_modifier(name: &str, params: Option<&PyScheduleParams>, s: f64, n: u64) -> PyResult<McModifier> {
    match name {
        "identity" | "id" => Ok(McModifier::Identity),
        "scale-invariant" | "si" => {
            let p = match params {
                Some(p) => p.inner,
                None => siattn::resolve_params(DEFAULT_TAU).map_err(to_py)?,
            };
            Ok(McModifier::Schedule(p))
        }
        "logn" => Ok(McModifier::LogN { s, n }),
        other => Err(PyValueError::new_err(format!("unknown modifier {other:?}"))),
    }
}

/// Monte Carlo statistics over `[t_start, t_end)` as a dict of means,
/// standard errors and the cap flag.
#[pyfunction]
#[pyo3(signature = (t_start, t_end, samples, seed = 0, modifier = "scale-invariant", params = None, s = DEFAULT_LOGN_S, n = 1))]
#[allow(clippy::too_many_arguments)]
fn estimate_range_stats(
    py: Python<'_>,
    t_start: u64,
    t_end: u64,
    samples: usize,
    seed: u64,
    modifier: &str,
    params: Option<&PyScheduleParams>,
    s: f64,
    n: u64,
) -> PyResult<Py<pyo3::types::PyDict>> {
    let range = RangeSpec::new(t_start, t_end).map_err(to_py)?;
    let cfg = McConfig::new(samples, seed, mc_modifier(modifier, params, s, n)?).map_err(to_py)?;
    let stats = py
        .detach(|| mclab::estimate_range_stats(&range, &cfg))
        .map_err(to_py)?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("z_mean", stats.z_mean)?;
    d.set_item("z_se", stats.z_se)?;
    d.set_item("n_mean", stats.n_mean)?;
    d.set_item("n_se", stats.n_se)?;
    d.set_item("h_mean", stats.h_mean)?;
    d.set_item("h_se", stats.h_se)?;
    d.set_item("samples", stats.samples)?;
    d.set_item("capped", stats.capped)?;
    Ok(d.unbind())
}

fn pos_scheme(
    pos: &str,
    theta: f64,
    effective_base: f64,
    rebase: bool,
    train_len: u64,
    infer_len: u64,
) -> PyResult<PosScheme> {
    Ok(match pos {
        "nope" => PosScheme::NoPE,
        "rope" => PosScheme::RoPE { theta },
        "prope" => PosScheme::PRoPE {
            theta,
            effective_base,
            rule: if rebase { PRopeRule::Rebase } else { PRopeRule::Truncate },
        },
        "ntk" => PosScheme::Ntk {
            theta,
            train_len,
            infer_len,
        },
        other => return Err(PyValueError::new_err(format!("unknown position scheme {other:?}"))),
    })
}

fn attn_modifier(name: &str, tau: f64, s: f64, n_heads: usize) -> PyResult<Modifier> {
    Ok(match name {
        "identity" | "id" => Modifier::Identity,
        "scale-invariant" | "si" => Modifier::ScaleInvariant {
            params: siattn::resolve_params(tau).map_err(to_py)?,
        },
        "logn" => Modifier::LogN { s, per_query: true },
        "alibi" => Modifier::Alibi { n_heads },
        other => return Err(PyValueError::new_err(format!("unknown modifier {other:?}"))),
    })
}

fn rows_of(t: &Tensor) -> Vec<Vec<f64>> {
    let (n, _) = t.matrix_dims().expect("matrix");
    (0..n).map(|i| t.row(i).to_vec()).collect()
}

/// Single-head causal attention over `[n x d]` row lists.
/// Returns `(output, weights)`.
#[pyfunction]
#[pyo3(signature = (
    q, k, v, pos = "nope", modifier = "identity", theta = DEFAULT_THETA,
    effective_base = DEFAULT_EFFECTIVE_BASE, rebase = false, train_len = 1, infer_len = 1,
    tau = DEFAULT_TAU, s = DEFAULT_LOGN_S, n_heads = 1, head = 0
))]
#[allow(clippy::too_many_arguments)]
fn attend(
    q: Vec<Vec<f64>>,
    k: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    pos: &str,
    modifier: &str,
    theta: f64,
    effective_base: f64,
    rebase: bool,
    train_len: u64,
    infer_len: u64,
    tau: f64,
    s: f64,
    n_heads: usize,
    head: usize,
) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let q = Tensor::from_rows(&q).map_err(to_py)?;
    let k = Tensor::from_rows(&k).map_err(to_py)?;
    let v = Tensor::from_rows(&v).map_err(to_py)?;
    let head_dim = q.matrix_dims().map_err(to_py)?.1;
    let cfg = AttentionConfig::new(
        pos_scheme(pos, theta, effective_base, rebase, train_len, infer_len)?,
        attn_modifier(modifier, tau, s, n_heads)?,
        head_dim,
        n_heads,
    )
    .map_err(to_py)?;
    let out = causal_attention(&q, &k, &v, &cfg, head).map_err(to_py)?;
    let weights = out.weights.as_ref().map(rows_of).unwrap_or_default();
    Ok((rows_of(&out.output), weights))
}

/// `(global_entropy, range_entropies, local_mass)` for one query row.
#[pyfunction]
#[pyo3(signature = (weights, query_index, boundaries = DEFAULT_BOUNDARIES.to_vec(), local_window = DEFAULT_LOCAL_WINDOW))]
fn metrics(
    weights: Vec<Vec<f64>>,
    query_index: usize,
    boundaries: Vec<u64>,
    local_window: usize,
) -> PyResult<(f64, Vec<f64>, f64)> {
    let w = Tensor::from_rows(&weights).map_err(to_py)?;
    let m = attention_metrics(&w, query_index, &boundaries, local_window).map_err(to_py)?;
    Ok((m.global_entropy, m.range_entropies, m.local_mass))
}

#[pyfunction]
#[pyo3(signature = (sample, n_quantiles = 99))]
fn qq_points(sample: Vec<f64>, n_quantiles: usize) -> PyResult<Vec<(f64, f64)>> {
    mclab::qq::qq_points(&sample, n_quantiles).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (t_max, tau = DEFAULT_TAU))]
fn schedule_csv(t_max: u64, tau: f64) -> PyResult<String> {
    let p = siattn::resolve_params(tau).map_err(to_py)?;
    Ok(experiments::schedule_table(&p, t_max).map_err(to_py)?.to_csv())
}

#[pyfunction]
#[pyo3(signature = (deltas, t_grid, samples, seed = 0, tau = DEFAULT_TAU))]
fn theorem1_csv(py: Python<'_>, deltas: Vec<u64>, t_grid: Vec<u64>, samples: usize, seed: u64, tau: f64) -> PyResult<String> {
    let p = siattn::resolve_params(tau).map_err(to_py)?;
    let report = py
        .detach(|| experiments::run_theorem1(&p, &deltas, &t_grid, samples, seed))
        .map_err(to_py)?;
    Ok(report.to_csv())
}

/// `schemes` entries are `"identity"`, `"logn"` or `"scale-invariant"`.
#[pyfunction]
#[pyo3(signature = (
    lengths, schemes, samples, seed = 0, tau = DEFAULT_TAU, s = DEFAULT_LOGN_S,
    boundaries = DEFAULT_BOUNDARIES.to_vec(), local_window = DEFAULT_LOCAL_WINDOW
))]
#[allow(clippy::too_many_arguments)]
fn fig1_csv(
    py: Python<'_>,
    lengths: Vec<u64>,
    schemes: Vec<String>,
    samples: usize,
    seed: u64,
    tau: f64,
    s: f64,
    boundaries: Vec<u64>,
    local_window: usize,
) -> PyResult<String> {
    let p = siattn::resolve_params(tau).map_err(to_py)?;
    let schemes = schemes
        .iter()
        .map(|name| match name.as_str() {
            "identity" | "id" => Ok(Fig1Scheme::Identity),
            "logn" => Ok(Fig1Scheme::LogN { s }),
            "scale-invariant" | "si" => Ok(Fig1Scheme::ScaleInvariant(p)),
            other => Err(PyValueError::new_err(format!("unknown scheme {other:?}"))),
        })
        .collect::<PyResult<Vec<_>>>()?;
    let report = py
        .detach(|| experiments::run_fig1(&lengths, &schemes, samples, seed, &boundaries, local_window))
        .map_err(to_py)?;
    Ok(report.to_csv())
}

/// `arms` entries are `"identity"` or `"scale-invariant"`.
#[pyfunction]
#[pyo3(signature = (deltas, t_grid, arms, samples, seed = 0, tau = DEFAULT_TAU))]
fn fig2_csv(
    py: Python<'_>,
    deltas: Vec<u64>,
    t_grid: Vec<u64>,
    arms: Vec<String>,
    samples: usize,
    seed: u64,
    tau: f64,
) -> PyResult<String> {
    let p = PyScheduleParams {
        inner: siattn::resolve_params(tau).map_err(to_py)?,
    };
    let arms = arms
        .iter()
        .map(|name| mc_modifier(name, Some(&p), DEFAULT_LOGN_S, 1))
        .collect::<PyResult<Vec<_>>>()?;
    let report = py
        .detach(|| experiments::run_fig2(&deltas, &t_grid, &arms, samples, seed))
        .map_err(to_py)?;
    Ok(report.to_csv())
}

#[pyfunction]
#[pyo3(signature = (sample, n_quantiles = 99))]
fn qq_csv(sample: Vec<f64>, n_quantiles: usize) -> PyResult<String> {
    Ok(experiments::run_qq(&sample, n_quantiles).map_err(to_py)?.to_csv())
}

#[pymodule]
fn siattn_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScheduleParams>()?;
    m.add("RESOLVED_ALPHA", siattn::schedule::RESOLVED_ALPHA)?;
    m.add("DEFAULT_TAU", DEFAULT_TAU)?;
    m.add_function(wrap_pyfunction!(resolve_params, m)?)?;
    m.add_function(wrap_pyfunction!(schedule_at, m)?)?;
    m.add_function(wrap_pyfunction!(transform_logit, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_exp_moment, m)?)?;
    m.add_function(wrap_pyfunction!(harmonic_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(range_asymptote, m)?)?;
    m.add_function(wrap_pyfunction!(expected_range_sums, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_range_stats, m)?)?;
    m.add_function(wrap_pyfunction!(attend, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(qq_points, m)?)?;
    m.add_function(wrap_pyfunction!(schedule_csv, m)?)?;
    m.add_function(wrap_pyfunction!(theorem1_csv, m)?)?;
    m.add_function(wrap_pyfunction!(fig1_csv, m)?)?;
    m.add_function(wrap_pyfunction!(fig2_csv, m)?)?;
    m.add_function(wrap_pyfunction!(qq_csv, m)?)?;
    Ok(())
}
