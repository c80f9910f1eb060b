//! Python bindings for the federated-optimization laboratory: dense
//! matrices, the oracle family, and config-driven experiment runs.

use fedmuon::config::ExperimentConfig;
use fedmuon::lmo::{self, NsConfig};
use fedmuon::mat::{self, NormKind};
use fedmuon::problems::dirichlet_partition;
use fedmuon::runner;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

fn err(e: fedmuon::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_norm(kind: &str, p: Option<f64>) -> PyResult<NormKind> {
    match (kind, p) {
        ("frobenius", None) => Ok(NormKind::Frobenius),
        ("spectral", None) => Ok(NormKind::Spectral),
        ("trace", None) => Ok(NormKind::Trace),
        ("euclidean_vec", None) => Ok(NormKind::EuclideanVec),
        ("schatten", Some(p)) => Ok(NormKind::Schatten(p)),
        ("schatten", None) => Err(PyValueError::new_err("schatten norm needs p")),
        (other, _) => Err(PyValueError::new_err(format!(
            "unknown norm kind '{other}' (expected frobenius/spectral/trace/euclidean_vec/schatten)"
        ))),
    }
}

/// Dense row-major matrix of 64-bit floats.
#[pyclass(name = "Mat")]
#[derive(Clone)]
struct PyMat {
    inner: mat::Mat,
}

#[pymethods]
impl PyMat {
    /// Build from a list of equally sized rows.
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(PyValueError::new_err("matrix needs at least one entry"));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(PyValueError::new_err("ragged rows"));
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        let n_rows = data.len() / cols;
        Ok(PyMat { inner: mat::Mat::from_vec(n_rows, cols, data).map_err(err)? })
    }

    #[staticmethod]
    fn zeros(rows: usize, cols: usize) -> PyResult<Self> {
        if rows == 0 || cols == 0 {
            return Err(PyValueError::new_err("dimensions must be positive"));
        }
        Ok(PyMat { inner: mat::Mat::zeros(rows, cols) })
    }

    #[staticmethod]
    fn eye(n: usize) -> PyResult<Self> {
        if n == 0 {
            return Err(PyValueError::new_err("dimension must be positive"));
        }
        Ok(PyMat { inner: mat::Mat::eye(n) })
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        self.inner.shape()
    }

    fn tolist(&self) -> Vec<Vec<f64>> {
        (0..self.inner.rows())
            .map(|i| (0..self.inner.cols()).map(|j| self.inner[(i, j)]).collect())
            .collect()
    }

    fn get(&self, i: usize, j: usize) -> PyResult<f64> {
        if i >= self.inner.rows() || j >= self.inner.cols() {
            return Err(PyValueError::new_err("index out of range"));
        }
        Ok(self.inner[(i, j)])
    }

    fn transpose(&self) -> PyMat {
        PyMat { inner: self.inner.transpose() }
    }

    fn frobenius(&self) -> f64 {
        self.inner.frobenius()
    }

    fn __repr__(&self) -> String {
        format!("Mat({}x{})", self.inner.rows(), self.inner.cols())
    }
}

/// Compact singular value decomposition: returns (u, s, vt).
#[pyfunction]
fn svd(a: &PyMat) -> PyResult<(PyMat, Vec<f64>, PyMat)> {
    let r = mat::svd(&a.inner).map_err(err)?;
    Ok((PyMat { inner: r.u }, r.s, PyMat { inner: r.vt }))
}

/// Elementwise-product sum of two equally shaped matrices.
#[pyfunction]
fn inner(a: &PyMat, b: &PyMat) -> PyResult<f64> {
    mat::inner(&a.inner, &b.inner).map_err(err)
}

/// Matrix norm: kind in {frobenius, spectral, trace, euclidean_vec, schatten}.
#[pyfunction]
#[pyo3(signature = (a, kind, p = None))]
fn norm(a: &PyMat, kind: &str, p: Option<f64>) -> PyResult<f64> {
    mat::norm(&a.inner, parse_norm(kind, p)?).map_err(err)
}

/// Name of the dual geometry.
#[pyfunction]
fn dual_norm_kind(kind: &str) -> PyResult<String> {
    let dual = mat::dual_norm_kind(parse_norm(kind, None)?).map_err(err)?;
    Ok(dual.to_string())
}

/// Exact linear minimization oracle over the unit ball of `kind`.
#[pyfunction]
fn lmo_exact(g: &PyMat, kind: &str) -> PyResult<PyMat> {
    Ok(PyMat { inner: lmo::lmo_exact(&g.inner, parse_norm(kind, None)?).map_err(err)? })
}

/// Inexact spectral oracle via the quintic iteration.
#[pyfunction]
#[pyo3(signature = (g, iters = 5, a = None, b = None, c = None))]
fn lmo_newton_schulz(
    g: &PyMat,
    iters: usize,
    a: Option<f64>,
    b: Option<f64>,
    c: Option<f64>,
) -> PyMat {
    let base = NsConfig::analyzed(iters);
    let cfg = NsConfig {
        a: a.unwrap_or(base.a),
        b: b.unwrap_or(base.b),
        c: c.unwrap_or(base.c),
        iters,
    };
    PyMat { inner: lmo::lmo_newton_schulz(&g.inner, &cfg) }
}

/// (kappa, p): the effective Schatten exponent after `t` iterations.
#[pyfunction]
fn effective_p(singular_values: Vec<f64>, t: usize) -> PyResult<(f64, f64)> {
    let e = lmo::effective_p(&singular_values, t).map_err(err)?;
    Ok((e.kappa, e.p))
}

/// (mean of oracle outputs, oracle of the mean) for a list of matrices.
#[pyfunction]
fn lmo_bias_witness(ms: Vec<PyMat>, kind: &str) -> PyResult<(PyMat, PyMat)> {
    let mats: Vec<mat::Mat> = ms.into_iter().map(|m| m.inner).collect();
    let (mean_of, of_mean) =
        lmo::lmo_bias_witness(&mats, parse_norm(kind, None)?).map_err(err)?;
    Ok((PyMat { inner: mean_of }, PyMat { inner: of_mean }))
}

/// Label-skewed partition of item indices over clients.
#[pyfunction]
fn dirichlet_split(
    labels: Vec<usize>,
    n_clients: usize,
    beta: f64,
    seed: u64,
) -> PyResult<Vec<Vec<usize>>> {
    dirichlet_partition(&labels, n_clients, beta, seed).map_err(err)
}

/// Generate a synthetic blob dataset and write the binary container plus its
/// JSON sidecar at `path_stem`(.bin/.json). Returns the per-class counts.
#[pyfunction]
fn generate_dataset(
    path_stem: std::path::PathBuf,
    samples: usize,
    features: usize,
    classes: usize,
    seed: u64,
) -> PyResult<Vec<usize>> {
    let data = fedmuon::problems::ToyDataset::generate(samples, features, classes, seed)
        .map_err(err)?;
    data.save(&path_stem).map_err(err)?;
    Ok(data.label_counts())
}

fn trace_dict<'py>(
    py: Python<'py>,
    seed: u64,
    t: &fedmuon::trace::RoundTrace,
) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new_bound(py);
    d.set_item("seed", seed)?;
    d.set_item("round", t.round)?;
    d.set_item("step", t.step)?;
    d.set_item("loss", t.loss)?;
    d.set_item("grad_frobenius", t.grad_frobenius)?;
    d.set_item("grad_trace", t.grad_trace)?;
    d.set_item("grad_spectral", t.grad_spectral)?;
    d.set_item("grad_schatten_phat", t.grad_schatten_phat)?;
    d.set_item("running_kappa", t.running_kappa)?;
    d.set_item("wallclock_ns", t.wallclock_ns)?;
    d.set_item("accuracy", t.accuracy)?;
    Ok(d)
}

/// Run every seed of a TOML experiment config in memory; returns one dict per
/// trace record.
#[pyfunction]
fn run_experiment<'py>(py: Python<'py>, config_toml: &str) -> PyResult<Bound<'py, PyList>> {
    let cfg = ExperimentConfig::from_toml(config_toml).map_err(err)?;
    let mut collected: Vec<(u64, fedmuon::trace::RoundTrace)> = Vec::new();
    py.allow_threads(|| -> Result<(), fedmuon::Error> {
        for &seed in &cfg.run.seeds {
            let problem = cfg.problem.build()?;
            let round_cfg = cfg.round.to_round_config(seed);
            let channel = cfg.channel(seed);
            fedmuon::fed::run(
                &round_cfg,
                problem.as_ref(),
                &channel,
                cfg.run.rounds,
                cfg.run.metric_every,
                cfg.run.wallclock,
                &mut |t| {
                    collected.push((seed, t.clone()));
                    Ok(())
                },
            )?;
        }
        Ok(())
    })
    .map_err(err)?;
    let list = PyList::empty_bound(py);
    for (seed, t) in &collected {
        list.append(trace_dict(py, *seed, t)?)?;
    }
    Ok(list)
}

/// LocalMuon next to FedMuon on the two-client scalar construction.
#[pyfunction]
#[pyo3(signature = (a = 1.0, alpha = 0.5, rounds = 1000, etas = None))]
fn counterexample<'py>(
    py: Python<'py>,
    a: f64,
    alpha: f64,
    rounds: usize,
    etas: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let etas = etas.unwrap_or_else(|| vec![0.01, 0.001]);
    let report = runner::counterexample_report(a, alpha, rounds, &etas).map_err(err)?;
    let d = PyDict::new_bound(py);
    d.set_item("floor", report.floor)?;
    d.set_item("fedmuon_eta", report.fedmuon_eta)?;
    d.set_item("localmuon_constant", report.localmuon_constant)?;
    d.set_item("fedmuon_min", report.fedmuon_min)?;
    d.set_item(
        "localmuon",
        report.localmuon.iter().map(|(_, g)| *g).collect::<Vec<f64>>(),
    )?;
    d.set_item("fedmuon", report.fedmuon.iter().map(|(_, g)| *g).collect::<Vec<f64>>())?;
    Ok(d)
}

#[pymodule]
fn fedmuon_py(_py: Python<'_>, m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMat>()?;
    m.add_function(wrap_pyfunction!(svd, m)?)?;
    m.add_function(wrap_pyfunction!(inner, m)?)?;
    m.add_function(wrap_pyfunction!(norm, m)?)?;
    m.add_function(wrap_pyfunction!(dual_norm_kind, m)?)?;
    m.add_function(wrap_pyfunction!(lmo_exact, m)?)?;
    m.add_function(wrap_pyfunction!(lmo_newton_schulz, m)?)?;
    m.add_function(wrap_pyfunction!(effective_p, m)?)?;
    m.add_function(wrap_pyfunction!(lmo_bias_witness, m)?)?;
    m.add_function(wrap_pyfunction!(dirichlet_split, m)?)?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(counterexample, m)?)?;
    Ok(())
}
