//! Python bindings. Problems and solutions cross the boundary as the same
//! JSON documents the CLI reads and writes.

use mlsync::io::{ProblemDocument, SolutionDocument};
use mlsync::kernels::hungarian as hungarian_kernel;
use mlsync::metrics::accuracy;
use mlsync::{AffinityConfig, Error, MLSyncParams, SynthConfig};
use nalgebra::DMatrix;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Synthetic problem as a JSON string.
#[pyfunction]
#[pyo3(signature = (seed=0, n_graphs=10, n_inliers=10, n_outliers=2, n_channels=5, epsilon=0.1))]
fn generate(
    seed: u64,
    n_graphs: usize,
    n_inliers: usize,
    n_outliers: usize,
    n_channels: usize,
    epsilon: f64,
) -> PyResult<String> {
    let cfg = SynthConfig {
        seed,
        n_graphs,
        n_inliers,
        n_outliers,
        n_channels,
        epsilon,
        ..SynthConfig::default()
    };
    let p = mlsync::generate_problem(&cfg).map_err(to_py)?;
    ProblemDocument::from_problem(&p).to_json().map_err(to_py)
}

/// Runs the synchronized solver on a problem JSON string; returns solution JSON.
#[pyfunction]
#[pyo3(signature = (problem, sigma2=0.3, theta=None, rho=None, tau=None, omega=None, mu=None, bootstrap_iters=None))]
#[allow(clippy::too_many_arguments)]
fn solve(
    problem: &str,
    sigma2: f64,
    theta: Option<f64>,
    rho: Option<f64>,
    tau: Option<f64>,
    omega: Option<f64>,
    mu: Option<f64>,
    bootstrap_iters: Option<usize>,
) -> PyResult<String> {
    let cfg = AffinityConfig {
        sigma2,
        ..AffinityConfig::default()
    };
    let p = ProblemDocument::from_json(problem)
        .and_then(|d| d.to_problem(&cfg))
        .map_err(to_py)?;
    let mut params = MLSyncParams::default();
    params.walker.theta = theta.unwrap_or(params.walker.theta);
    params.walker.rho = rho.unwrap_or(params.walker.rho);
    params.walker.tau = tau.unwrap_or(params.walker.tau);
    params.omega = omega.unwrap_or(params.omega);
    params.mu = mu.unwrap_or(params.mu);
    params.bootstrap_iters = bootstrap_iters.unwrap_or(params.bootstrap_iters);
    let report = mlsync::solve(&p, &params).map_err(to_py)?;
    let acc = match &p.ground_truth {
        Some(gt) => Some(accuracy(&report.assignments, Some(gt)).map_err(to_py)?),
        None => None,
    };
    SolutionDocument::from_report(&p, &report, acc)
        .to_json()
        .map_err(to_py)
}

/// Structural problems found in a problem JSON string; empty when valid.
#[pyfunction]
#[pyo3(signature = (problem, sigma2=0.3))]
fn validate(problem: &str, sigma2: f64) -> PyResult<Vec<String>> {
    let cfg = AffinityConfig {
        sigma2,
        ..AffinityConfig::default()
    };
    let p = ProblemDocument::from_json(problem)
        .and_then(|d| d.to_problem(&cfg))
        .map_err(to_py)?;
    Ok(mlsync::validate_problem(&p))
}

/// Maximum-score one-to-one matching of a rectangular score matrix (list of rows).
#[pyfunction]
fn hungarian(score: Vec<Vec<f64>>) -> PyResult<Vec<(usize, usize)>> {
    let rows = score.len();
    let cols = score.first().map_or(0, Vec::len);
    if score.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    let flat: Vec<f64> = score.into_iter().flatten().collect();
    let x = hungarian_kernel(&DMatrix::from_row_slice(rows, cols, &flat)).map_err(to_py)?;
    Ok(x.matches())
}

#[pymodule]
fn mlsync_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(hungarian, m)?)?;
    Ok(())
}
