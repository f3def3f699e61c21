//! Python bindings: sealing, reading, checking, closed-form formulas,
//! experiments and the single-bit demo.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use qseal_core::adversary::{evasion_probability_empirical, Strategy};
use qseal_core::analytics;
use qseal_core::demo::{run_demo as core_run_demo, DemoSpec};
use qseal_core::experiments::{run, ExperimentConfig};
use qseal_core::protocol::{self, CheckOptions};
use qseal_core::rng::{random_bit, trial_rng};

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "ProtocolParams", frozen, from_py_object)]
#[derive(Clone)]
struct PyProtocolParams {
    inner: protocol::ProtocolParams,
}

#[pymethods]
impl PyProtocolParams {
    #[new]
    #[pyo3(signature = (n, theta, alpha, seed = 0))]
    fn new(n: usize, theta: f64, alpha: f64, seed: u64) -> PyResult<Self> {
        protocol::ProtocolParams::new(n, theta, alpha, seed)
            .map(|inner| PyProtocolParams { inner })
            .map_err(value_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn theta(&self) -> f64 {
        self.inner.theta_max
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    /// Theta / n^alpha.
    fn angle_bound(&self) -> f64 {
        self.inner.angle_bound()
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "ProtocolParams(n={}, theta={}, alpha={}, seed={})",
            p.n, p.theta_max, p.alpha, p.seed
        )
    }
}

#[pyclass(name = "SealedString")]
struct PySealedString {
    inner: protocol::SealedString,
}

#[pymethods]
impl PySealedString {
    /// Seals `bits` (random bits when omitted) on stream `stream` of `seed`.
    #[staticmethod]
    #[pyo3(signature = (params, bits = None, seed = 0, stream = 0))]
    fn seal(params: &PyProtocolParams, bits: Option<Vec<bool>>, seed: u64, stream: u64) -> PyResult<Self> {
        let mut rng = trial_rng(seed, stream);
        let bits = bits.unwrap_or_else(|| (0..params.inner.n).map(|_| random_bit(&mut rng)).collect());
        protocol::seal(&params.inner, &bits, &mut rng)
            .map(|inner| PySealedString { inner })
            .map_err(value_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        protocol::SealedString::from_json(text)
            .map(|inner| PySealedString { inner })
            .map_err(value_err)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    /// Record without the secret bits and angles.
    fn public_json(&self) -> String {
        self.inner.public_json()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    /// Alice's secret bits.
    #[getter]
    fn bits(&self) -> Vec<bool> {
        self.inner.alice().bits().to_vec()
    }

    /// Alice's secret angles.
    #[getter]
    fn thetas(&self) -> Vec<f64> {
        self.inner.alice().thetas().to_vec()
    }

    #[pyo3(signature = (seed = 0, stream = 1))]
    fn read_honest(&mut self, seed: u64, stream: u64) -> PyResult<Vec<bool>> {
        protocol::read_honest(&mut self.inner, &mut trial_rng(seed, stream)).map_err(value_err)
    }

    /// Returns `(verdict, per_qubit_pass)` with verdict "UNREAD" or "READ".
    #[pyo3(signature = (seed = 0, stream = 2, early_exit = false))]
    fn check(&mut self, seed: u64, stream: u64, early_exit: bool) -> PyResult<(String, Vec<bool>)> {
        let report = protocol::check_with(
            &mut self.inner,
            &mut trial_rng(seed, stream),
            CheckOptions { early_exit },
        )
        .map_err(value_err)?;
        let verdict = if report.is_unread() { "UNREAD" } else { "READ" };
        Ok((verdict.to_owned(), report.per_qubit_pass))
    }
}

#[pyfunction]
fn eps_bound(theta: f64, alpha: f64, n: usize) -> PyResult<f64> {
    analytics::eps_bound(theta, alpha, n).map_err(value_err)
}

#[pyfunction]
fn pass_prob_fake(theta: f64, theta_prime: f64) -> PyResult<f64> {
    analytics::pass_prob_fake(theta, theta_prime).map_err(value_err)
}

#[pyfunction]
fn pass_prob_no_fake(theta: f64) -> PyResult<f64> {
    analytics::pass_prob_no_fake(theta).map_err(value_err)
}

#[pyfunction]
fn avg_pass_prob(theta: f64, alpha: f64, n: usize, theta_prime: f64) -> PyResult<f64> {
    analytics::avg_pass_prob(theta, alpha, n, theta_prime).map_err(value_err)
}

#[pyfunction]
fn avg_pass_prob_closed_form(theta: f64, alpha: f64, n: usize, theta_prime: f64) -> PyResult<f64> {
    analytics::avg_pass_prob_closed_form(theta, alpha, n, theta_prime).map_err(value_err)
}

#[pyfunction]
fn evade_prob_individual(thetas: Vec<f64>) -> PyResult<f64> {
    analytics::evade_prob_individual(&thetas).map_err(value_err)
}

#[pyfunction]
fn info_bound(n: usize, m: f64) -> PyResult<f64> {
    analytics::info_bound(n, m).map_err(value_err)
}

/// Returns `(raw, clamped)`.
#[pyfunction]
fn evade_bound_collective(thetas: Vec<f64>, k: f64) -> PyResult<(f64, f64)> {
    analytics::evade_bound_collective(&thetas, k)
        .map(|b| (b.raw, b.clamped))
        .map_err(value_err)
}

#[pyfunction]
fn per_v_amplitude_bound(thetas: Vec<f64>) -> PyResult<f64> {
    analytics::per_v_amplitude_bound(&thetas).map_err(value_err)
}

/// Seal, attack, check `trials` times. `strategy` is a JSON strategy record,
/// e.g. `{"type": "collective", "policy": "parity"}`. Returns
/// `(estimate, ci_low, ci_high)`.
#[pyfunction]
fn evasion_probability(
    py: Python<'_>,
    strategy: &str,
    params: &PyProtocolParams,
    trials: u64,
    seed: u64,
) -> PyResult<(f64, f64, f64)> {
    let strategy: Strategy = serde_json::from_str(strategy).map_err(value_err)?;
    let p = params.inner;
    let est = py
        .detach(|| evasion_probability_empirical(&strategy, &p, trials, seed))
        .map_err(value_err)?;
    Ok((est.estimate, est.ci_low, est.ci_high))
}

/// Runs an experiment config given as JSON; returns the reports as a JSON array.
#[pyfunction]
fn run_experiment(py: Python<'_>, config_json: &str) -> PyResult<String> {
    let config = ExperimentConfig::from_json(config_json).map_err(value_err)?;
    let reports = py.detach(|| run(&config)).map_err(value_err)?;
    serde_json::to_string(&reports).map_err(value_err)
}

/// Runs the single-bit demo; returns the transcript as JSON.
#[pyfunction]
#[pyo3(signature = (secret_bit, seed = 0, read = true, theta = 0.2, alpha = 0.25, text = None, dummies = 16))]
fn run_demo(
    secret_bit: bool,
    seed: u64,
    read: bool,
    theta: f64,
    alpha: f64,
    text: Option<String>,
    dummies: usize,
) -> PyResult<String> {
    let mut spec = DemoSpec::new(secret_bit);
    if let Some(t) = text {
        spec.instruction_text = t;
    }
    spec.dummy_count = dummies;
    let transcript = core_run_demo(&spec, theta, alpha, seed, read).map_err(value_err)?;
    serde_json::to_string(&transcript).map_err(value_err)
}

#[pymodule]
fn qseal(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProtocolParams>()?;
    m.add_class::<PySealedString>()?;
    m.add_function(wrap_pyfunction!(eps_bound, m)?)?;
    m.add_function(wrap_pyfunction!(pass_prob_fake, m)?)?;
    m.add_function(wrap_pyfunction!(pass_prob_no_fake, m)?)?;
    m.add_function(wrap_pyfunction!(avg_pass_prob, m)?)?;
    m.add_function(wrap_pyfunction!(avg_pass_prob_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(evade_prob_individual, m)?)?;
    m.add_function(wrap_pyfunction!(info_bound, m)?)?;
    m.add_function(wrap_pyfunction!(evade_bound_collective, m)?)?;
    m.add_function(wrap_pyfunction!(per_v_amplitude_bound, m)?)?;
    m.add_function(wrap_pyfunction!(evasion_probability, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(run_demo, m)?)?;
    Ok(())
}
