//! Python bindings: CSPR geometry, identity checks, presets, trials and sweeps.

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use jsfr_core::harness::{self, ExperimentConfig};
use jsfr_core::{recovery, tx, Error};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::Csv(_) => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

#[pyclass(get_all, frozen, skip_from_py_object, module = "jsfr")]
#[derive(Clone)]
struct Metrics {
    ber: f64,
    evm_db: f64,
    q_db: f64,
    per_branch_cspr: Vec<f64>,
    converged: bool,
}

#[pymethods]
impl Metrics {
    fn __repr__(&self) -> String {
        format!("Metrics(ber={:.3e}, evm_db={:.2}, q_db={:.2}, converged={})", self.ber, self.evm_db, self.q_db, self.converged)
    }
}

impl From<jsfr_core::dsp::Metrics> for Metrics {
    fn from(m: jsfr_core::dsp::Metrics) -> Self {
        Self { ber: m.ber, evm_db: m.evm_db, q_db: m.q_db, per_branch_cspr: m.per_branch_cspr, converged: m.converged }
    }
}

#[pyclass(get_all, frozen, module = "jsfr")]
struct SweepRow {
    point: Vec<f64>,
    trial: usize,
    seed: u64,
    metrics: Metrics,
}

/// Branch CSPR multipliers `(X, Y, X+Y, X-Y)` of the 2x2-coupler receiver.
#[pyfunction]
fn cspr_2x2(alpha: f64, theta: f64) -> Vec<f64> {
    recovery::cspr_2x2(alpha, theta).to_vec()
}

/// Multipliers `(X+Y, X-Y, X+jY, X-jY)` of the 90-degree hybrid receiver.
#[pyfunction]
fn cspr_hybrid(alpha: f64, theta: f64) -> Vec<f64> {
    recovery::cspr_hybrid(alpha, theta).to_vec()
}

/// Multipliers `(aX+bY, bX+bY, bX+aY)` of the 3x3-coupler receiver.
#[pyfunction]
fn cspr_3x3(alpha: f64, theta: f64) -> Vec<f64> {
    recovery::cspr_3x3(alpha, theta).to_vec()
}

#[pyfunction]
fn second_max(values: Vec<f64>) -> PyResult<f64> {
    recovery::second_max(&values).map_err(to_py)
}

/// Net rate in Gb/s of a dual-polarization frame.
#[pyfunction]
#[pyo3(signature = (payload_len, train_len, pilot_count, fec_overhead, baud=56e9, qam_order=16))]
fn net_rate(payload_len: usize, train_len: usize, pilot_count: usize, fec_overhead: f64, baud: f64, qam_order: usize) -> PyResult<f64> {
    let spec = tx::FrameSpec { payload_len, train_len, pilot_count: Some(pilot_count), baud, qam_order, ..Default::default() };
    tx::compute_net_rate(&spec, fec_overhead, true).map_err(to_py)
}

/// `(passed, [(name, residual, tolerance, passed), ...])`
#[pyfunction]
fn verify_identities() -> (bool, Vec<(String, f64, f64, bool)>) {
    let r = harness::verify_identities();
    let checks = r.checks.iter().map(|c| (c.name.to_string(), c.residual, c.tolerance, c.passed())).collect();
    (r.passed(), checks)
}

#[pyfunction]
fn preset_names() -> Vec<&'static str> {
    harness::PRESET_NAMES.to_vec()
}

/// TOML text of a committed preset.
#[pyfunction]
fn preset(name: &str) -> PyResult<String> {
    harness::presets::preset_text(name).map(str::to_owned).map_err(to_py)
}

/// Default configuration as TOML.
#[pyfunction]
fn default_config() -> PyResult<String> {
    ExperimentConfig::default().to_toml().map_err(to_py)
}

/// One trial at a sweep point (empty for the base point).
#[pyfunction]
#[pyo3(signature = (config, seed, point=Vec::new()))]
fn run_trial(py: Python<'_>, config: &str, seed: u64, point: Vec<f64>) -> PyResult<Metrics> {
    let cfg = ExperimentConfig::from_toml(config).map_err(to_py)?;
    py.detach(|| harness::run_trial(&cfg, &point, seed)).map(Metrics::from).map_err(to_py)
}

/// Full sweep; returns `(columns, rows)`.
#[pyfunction]
#[pyo3(signature = (config, workers=None))]
fn sweep(py: Python<'_>, config: &str, workers: Option<usize>) -> PyResult<(Vec<&'static str>, Vec<SweepRow>)> {
    let cfg = ExperimentConfig::from_toml(config).map_err(to_py)?;
    let result = py.detach(|| harness::sweep(&cfg, workers)).map_err(to_py)?;
    let rows = result
        .rows
        .into_iter()
        .map(|r| SweepRow { point: r.point, trial: r.trial, seed: r.seed, metrics: r.metrics.into() })
        .collect();
    Ok((result.columns, rows))
}

#[pymodule]
fn jsfr(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Metrics>()?;
    m.add_class::<SweepRow>()?;
    m.add_function(wrap_pyfunction!(cspr_2x2, m)?)?;
    m.add_function(wrap_pyfunction!(cspr_hybrid, m)?)?;
    m.add_function(wrap_pyfunction!(cspr_3x3, m)?)?;
    m.add_function(wrap_pyfunction!(second_max, m)?)?;
    m.add_function(wrap_pyfunction!(net_rate, m)?)?;
    m.add_function(wrap_pyfunction!(verify_identities, m)?)?;
    m.add_function(wrap_pyfunction!(preset_names, m)?)?;
    m.add_function(wrap_pyfunction!(preset, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_trial, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    Ok(())
}
