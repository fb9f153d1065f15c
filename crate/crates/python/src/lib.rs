//! Python bindings. Matrices cross the boundary as lists of rows; configs as
//! JSON strings or dicts with the same fields as the Rust structs.

use glen::bench::{self, Method};
use glen::cgl::CglOptions;
use glen::glen::Variant;
use glen::signal::{generate_dataset, OffsetSpec, SyntheticDatasetSpec};
use glen::{ExponentialFamily, GlenConfig, GlenError, GraphModel, GraphModelSpec, LaplacianMatrix};
use nalgebra::DMatrix;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyString};

create_exception!(pyglen, GlenException, PyException, "Raised for any error reported by the estimator.");

fn to_py(e: GlenError) -> PyErr {
    GlenException::new_err(format!("{}: {e}", e.kind()))
}

fn to_matrix(rows: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(to_py(GlenError::Dimension("rows have different lengths".into())));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn to_laplacian(rows: Vec<Vec<f64>>) -> PyResult<LaplacianMatrix> {
    LaplacianMatrix::new(to_matrix(rows)?).map_err(to_py)
}

fn parse_family(name: &str) -> PyResult<ExponentialFamily> {
    name.parse().map_err(to_py)
}

/// Accepts `None`, a JSON string or a dict and deserializes it.
fn parse_config<T: serde::de::DeserializeOwned + Default>(cfg: Option<&Bound<'_, PyAny>>) -> PyResult<T> {
    let Some(obj) = cfg else { return Ok(T::default()) };
    let text: String = if obj.is_instance_of::<PyString>() {
        obj.extract()?
    } else if obj.is_instance_of::<PyDict>() {
        obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?
    } else {
        return Err(to_py(GlenError::Config("config must be a JSON string or a dict".into())));
    };
    serde_json::from_str(&text).map_err(|e| to_py(GlenError::from(e)))
}

/// A simulated dataset: observations and the ground truth behind them.
#[pyclass(frozen, get_all)]
struct Dataset {
    x: Vec<Vec<f64>>,
    laplacian: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    mu: Vec<f64>,
}

/// Output of one estimator run.
#[pyclass(frozen, get_all)]
struct FitResult {
    laplacian: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    mu: Vec<f64>,
    objective_trace: Vec<f64>,
    iterations: usize,
    converged: bool,
}

#[pymethods]
impl FitResult {
    fn __repr__(&self) -> String {
        format!(
            "FitResult(n_nodes={}, iterations={}, converged={})",
            self.laplacian.len(),
            self.iterations,
            self.converged
        )
    }
}

#[pyfunction]
#[pyo3(signature = (model="er", n_nodes=20, n_signals=2000, family="poisson", seed=0, graph_index=0))]
fn simulate(
    model: &str,
    n_nodes: usize,
    n_signals: usize,
    family: &str,
    seed: u64,
    graph_index: u64,
) -> PyResult<Dataset> {
    let spec = SyntheticDatasetSpec {
        graph_spec: GraphModelSpec::new(GraphModel::from_name(model).map_err(to_py)?, n_nodes),
        family: parse_family(family)?,
        n_signals,
        offset: OffsetSpec::PaperPattern,
        seed,
        graph_index,
    };
    let data = generate_dataset(&spec).map_err(to_py)?;
    let truth = data.ground_truth.expect("synthetic data carries its ground truth");
    Ok(Dataset {
        x: to_rows(&data.x),
        laplacian: to_rows(truth.l0.matrix()),
        y: to_rows(&truth.y),
        mu: truth.mu,
    })
}

/// Runs the estimator. Keyword arguments override fields of `config`.
#[pyfunction]
#[pyo3(signature = (x, method="glen", family=None, alpha=None, beta=None, gamma=None, max_iter=None, config=None))]
#[allow(clippy::too_many_arguments)]
fn fit(
    py: Python<'_>,
    x: Vec<Vec<f64>>,
    method: &str,
    family: Option<&str>,
    alpha: Option<f64>,
    beta: Option<f64>,
    gamma: Option<f64>,
    max_iter: Option<usize>,
    config: Option<&Bound<'_, PyAny>>,
) -> PyResult<FitResult> {
    let mut cfg: GlenConfig = parse_config(config)?;
    if let Some(f) = family {
        cfg.family = parse_family(f)?;
    }
    if let Some(a) = alpha {
        cfg.alpha = a;
    }
    if let Some(b) = beta {
        cfg.beta = b;
    }
    if let Some(g) = gamma {
        cfg.gamma = g;
    }
    if let Some(it) = max_iter {
        cfg.outer_max_iter = it;
    }
    match method.parse::<Method>().map_err(to_py)? {
        Method::Glen => {
            cfg.variant = Variant::Map;
            cfg.gamma = 0.0;
        }
        Method::GlenVi if cfg.variant == Variant::Map => cfg.variant = Variant::vi(),
        Method::GlenVi => {}
        Method::GlenTv if cfg.gamma <= 0.0 => {
            return Err(to_py(GlenError::Config("glen-tv needs a positive gamma".into())));
        }
        Method::GlenTv => {}
        Method::CglBaseline => {
            return Err(to_py(GlenError::Config("use cgl_baseline for the baseline".into())));
        }
    }
    let x = to_matrix(x)?;
    let state = py.detach(|| glen::run_glen(&x, &cfg)).map_err(to_py)?;
    Ok(FitResult {
        laplacian: to_rows(state.l.matrix()),
        y: to_rows(&state.y),
        mu: state.mu,
        objective_trace: state.objective_trace,
        iterations: state.iterations,
        converged: state.converged,
    })
}

/// Structure and weight scores of an estimate against the true Laplacian.
#[pyfunction]
fn evaluate<'py>(py: Python<'py>, estimate: Vec<Vec<f64>>, truth: Vec<Vec<f64>>) -> PyResult<Bound<'py, PyDict>> {
    let r = glen::metrics::evaluate(&to_laplacian(estimate)?, &to_laplacian(truth)?).map_err(to_py)?;
    let d = PyDict::new(py);
    for (k, v) in [
        ("precision", r.precision),
        ("recall", r.recall),
        ("f_score", r.f_score),
        ("nmi", r.nmi),
        ("re_l", r.re_l),
        ("re_edge_l1", r.re_edge_l1),
        ("re_edge_l2", r.re_edge_l2),
        ("re_deg_l1", r.re_deg_l1),
        ("re_deg_l2", r.re_deg_l2),
    ] {
        d.set_item(k, v)?;
    }
    Ok(d)
}

/// Combinatorial graph Laplacian estimate from a statistic matrix `s`.
#[pyfunction]
#[pyo3(signature = (s, alpha=0.0, tol=1e-6, max_iter=10_000))]
fn solve_cgl(py: Python<'_>, s: Vec<Vec<f64>>, alpha: f64, tol: f64, max_iter: usize) -> PyResult<Vec<Vec<f64>>> {
    let problem = glen::CglProblem::new(to_matrix(s)?, alpha).map_err(to_py)?;
    let sol = py.detach(|| glen::solve_cgl(&problem, CglOptions { tol, max_iter })).map_err(to_py)?;
    Ok(to_rows(sol.laplacian.matrix()))
}

/// CGL on the covariance of `log(1 + x)`.
#[pyfunction]
#[pyo3(signature = (x, alpha=0.01))]
fn cgl_baseline(py: Python<'_>, x: Vec<Vec<f64>>, alpha: f64) -> PyResult<Vec<Vec<f64>>> {
    let x = to_matrix(x)?;
    let l = py.detach(|| bench::cgl_baseline(&x, alpha, CglOptions::default())).map_err(to_py)?;
    Ok(to_rows(l.matrix()))
}

#[pymodule]
pub fn pyglen(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("GlenException", m.py().get_type::<GlenException>())?;
    m.add_class::<Dataset>()?;
    m.add_class::<FitResult>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(solve_cgl, m)?)?;
    m.add_function(wrap_pyfunction!(cgl_baseline, m)?)?;
    Ok(())
}
