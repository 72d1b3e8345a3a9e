//! Python bindings: prox and Bregman primitives, the two experiment harnesses
//! and the verification suites.

use optcmd::experiments::{run_portfolio, run_tracking, synth_market, MarketLaw, PortfolioConfig, TrackingConfig};
use optcmd::verify::{run_selected, VerifyOptions};
use optcmd::{FeasibleSet, MirrorSetup, NonsmoothPart};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn to_py(e: optcmd::Error) -> PyErr {
    match e {
        optcmd::Error::Config(_)
        | optcmd::Error::UnknownModel(_)
        | optcmd::Error::UnknownTheorem(_)
        | optcmd::Error::DimensionMismatch { .. }
        | optcmd::Error::DomainViolation(_)
        | optcmd::Error::UnsupportedCombination(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// `geometry` is one of `whole`, `box`, `ball`, `simplex` (euclidean) or
/// `entropy` (negative entropy on the simplex).
fn setup(geometry: &str, dim: usize, size: f64) -> PyResult<MirrorSetup> {
    let set = match geometry {
        "whole" => FeasibleSet::WholeSpace,
        "box" => FeasibleSet::unit_box(dim, size),
        "ball" => FeasibleSet::centered_ball(dim, size),
        "simplex" => FeasibleSet::Simplex,
        "entropy" => return MirrorSetup::entropy_simplex(dim).map_err(to_py),
        other => return Err(PyValueError::new_err(format!("unknown geometry {other:?}"))),
    };
    MirrorSetup::euclidean(dim, set).map_err(to_py)
}

/// `arg min η⟨w, x⟩ + η·l1·‖x‖₁ + B(x, v)` over the chosen set.
#[pyfunction]
#[pyo3(signature = (w, v, eta, geometry = "whole", l1 = 0.0, size = 1.0))]
fn composite_prox(w: Vec<f64>, v: Vec<f64>, eta: f64, geometry: &str, l1: f64, size: f64) -> PyResult<Vec<f64>> {
    let s = setup(geometry, v.len(), size)?;
    let r = if l1 == 0.0 { NonsmoothPart::Zero } else { NonsmoothPart::L1 { weight: l1 } };
    optcmd::composite_prox(&s, &w, &r, eta, &v).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (x, y, geometry = "whole", size = 1.0))]
fn bregman(x: Vec<f64>, y: Vec<f64>, geometry: &str, size: f64) -> PyResult<f64> {
    setup(geometry, x.len(), size)?.bregman(&x, &y).map_err(to_py)
}

/// Mean final dynamic regret keyed by `algorithm/model`.
#[pyfunction]
#[pyo3(signature = (horizon = 1000, repetitions = 100, seed = 0))]
fn tracking<'py>(py: Python<'py>, horizon: usize, repetitions: usize, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let config = TrackingConfig {
        horizon,
        repetitions,
        seed,
        ..TrackingConfig::default()
    };
    let res = py.detach(|| run_tracking(&config)).map_err(to_py)?;
    let out = PyDict::new(py);
    for run in &res.ledgers {
        out.set_item(
            format!("{}/{}", run.algorithm, run.model_id),
            res.final_regret(&run.algorithm, &run.model_id),
        )?;
    }
    Ok(out)
}

/// Mean final static regret per predictor and `cup` on a synthetic market.
#[pyfunction]
#[pyo3(signature = (assets = 10, horizon = 1000, seed = 0, repetitions = 10))]
fn portfolio<'py>(
    py: Python<'py>,
    assets: usize,
    horizon: usize,
    seed: u64,
    repetitions: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let config = PortfolioConfig {
        seed,
        repetitions,
        ..PortfolioConfig::default()
    };
    let res = py
        .detach(|| {
            let market = synth_market(assets, horizon, &MarketLaw::default(), &mut ChaCha8Rng::seed_from_u64(seed))?;
            run_portfolio(&config, &market)
        })
        .map_err(to_py)?;
    let out = PyDict::new(py);
    for run in &res.ledgers {
        out.set_item(&run.model_id, res.final_regret(&run.model_id))?;
    }
    Ok(out)
}

/// `(name, passed, cases, violations)` per selected suite.
#[pyfunction]
#[pyo3(signature = (selection = "", scale = 1.0, seed = 0))]
fn verify(py: Python<'_>, selection: &str, scale: f64, seed: u64) -> PyResult<Vec<(String, bool, usize, usize)>> {
    let reports = py
        .detach(|| run_selected(selection, VerifyOptions { seed, scale }))
        .map_err(to_py)?;
    Ok(reports
        .into_iter()
        .map(|r| (r.name, r.passed, r.cases, r.violations))
        .collect())
}

#[pymodule]
fn optcmd_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(composite_prox, m)?)?;
    m.add_function(wrap_pyfunction!(bregman, m)?)?;
    m.add_function(wrap_pyfunction!(tracking, m)?)?;
    m.add_function(wrap_pyfunction!(portfolio, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
