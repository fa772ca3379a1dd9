//! Python module `anf_py`: configs, training runs, dimension arithmetic and
//! the noise-weight regression check.

use anf_core::agents::NetworkKind;
use anf_core::harness::{self, ConjectureConfig, ExperimentConfig};
use anf_core::Error;
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Numerical(_) => PyArithmeticError::new_err(e.to_string()),
        Error::Io(_) | Error::Format(_) => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn load(config: &str, overrides: Option<Vec<String>>) -> PyResult<(ExperimentConfig, String)> {
    ExperimentConfig::load(config, &overrides.unwrap_or_default()).map_err(to_py)
}

fn network(name: &str) -> PyResult<NetworkKind> {
    NetworkKind::ALL
        .into_iter()
        .find(|k| k.name() == name)
        .ok_or_else(|| PyValueError::new_err(format!("unknown network {name:?}; use actor, critic1 or critic2")))
}

#[pyfunction]
fn ene_dim(d_og: usize, noise_fraction: f64) -> PyResult<usize> {
    anf_core::envs::ene_dim(d_og, noise_fraction).map_err(to_py)
}

#[pyfunction]
fn presets() -> Vec<&'static str> {
    harness::presets::PRESET_NAMES.to_vec()
}

#[pyfunction]
fn suites() -> Vec<&'static str> {
    harness::SUITE_NAMES.to_vec()
}

#[pyfunction]
fn config_reference() -> String {
    harness::config_reference()
}

/// Resolved TOML of a preset or file with overrides applied.
#[pyfunction]
#[pyo3(signature = (config, overrides=None))]
fn resolve_config(config: &str, overrides: Option<Vec<String>>) -> PyResult<String> {
    Ok(load(config, overrides)?.0.to_toml_string())
}

#[pyfunction]
fn final_score(steps: Vec<u64>, returns: Vec<f64>, total_steps: u64) -> PyResult<f64> {
    if steps.len() != returns.len() {
        return Err(PyValueError::new_err("steps and returns differ in length"));
    }
    let points: Vec<(u64, f64)> = steps.into_iter().zip(returns).collect();
    harness::final_score_of(&points, total_steps).map_err(to_py)
}

/// `(mean, half_width)` of the normal-approximation 95% interval.
#[pyfunction]
fn mean_ci(values: Vec<f64>) -> (f64, f64) {
    let ci = harness::mean_ci(&values);
    (ci.mean, ci.half_width)
}

#[pyfunction]
#[pyo3(signature = (mu=0.0, a=1.0, lr=0.01, steps=5000, seed=0))]
fn conjecture<'py>(py: Python<'py>, mu: f64, a: f64, lr: f64, steps: usize, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let r = harness::conjecture_oracle(&ConjectureConfig {
        target_a: a,
        noise_mean: mu,
        lr,
        steps,
        seed,
        ..Default::default()
    })
    .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("w1", r.w1)?;
    d.set_item("w2", r.w2)?;
    d.set_item("passed", r.noise_weight_vanished())?;
    d.set_item("trajectory", r.trajectory)?;
    Ok(d)
}

/// Train one seed with artifacts on disk; returns the run summary.
#[pyfunction]
#[pyo3(signature = (config, seed=0, overrides=None, output=None))]
fn execute_run<'py>(
    py: Python<'py>,
    config: &str,
    seed: u64,
    overrides: Option<Vec<String>>,
    output: Option<String>,
) -> PyResult<Bound<'py, PyDict>> {
    let (mut cfg, name) = load(config, overrides)?;
    if let Some(dir) = output {
        cfg.run.output_dir = dir.into();
    }
    let s = py.detach(|| harness::execute_run(&cfg, &name, seed, false)).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("seed", s.seed)?;
    d.set_item("final_score", s.final_score)?;
    d.set_item("actor_params", s.actor_params)?;
    d.set_item("d_ene", s.d_ene)?;
    d.set_item("run_dir", s.run_dir.display().to_string())?;
    Ok(d)
}

/// A single training run that can be stepped, inspected and checkpointed.
#[pyclass(module = "anf_py")]
struct Trainer {
    inner: harness::Trainer,
}

#[pymethods]
impl Trainer {
    #[new]
    #[pyo3(signature = (config="toy_anf_td3", seed=0, overrides=None))]
    fn new(config: &str, seed: u64, overrides: Option<Vec<String>>) -> PyResult<Self> {
        let (cfg, _) = load(config, overrides)?;
        Ok(Self {
            inner: harness::Trainer::new(&cfg, seed).map_err(to_py)?,
        })
    }

    #[getter]
    fn step(&self) -> u64 {
        self.inner.step()
    }

    #[getter]
    fn total_steps(&self) -> u64 {
        self.inner.config().run.total_steps
    }

    #[getter]
    fn state_dim(&self) -> usize {
        self.inner.state_dim()
    }

    #[getter]
    fn original_dim(&self) -> usize {
        self.inner.original_dim()
    }

    #[getter]
    fn actor_params(&self) -> usize {
        self.inner.agent().actor_weight_count()
    }

    #[getter]
    fn config(&self) -> String {
        self.inner.config().to_toml_string()
    }

    /// Train until `step` (capped at the configured total).
    fn run_until(&mut self, py: Python<'_>, step: u64) -> PyResult<()> {
        let inner = &mut self.inner;
        py.detach(|| inner.run_until(step)).map_err(to_py)
    }

    /// `(mean, std)` of deterministic evaluation returns at the current step.
    fn evaluate(&mut self) -> PyResult<(f64, f64)> {
        let step = self.inner.step();
        self.inner.evaluate(step).map_err(to_py)
    }

    /// Deterministic action in `[-1, 1]` for an already-augmented observation.
    fn act(&self, observation: Vec<f64>) -> PyResult<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        self.inner.agent().select_action(&observation, false, &mut rng).map_err(to_py)
    }

    fn final_score(&self) -> PyResult<f64> {
        self.inner.log().final_score().map_err(to_py)
    }

    /// Evaluation records as a list of dicts.
    fn evals<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner
            .log()
            .evals
            .iter()
            .map(|e| {
                let d = PyDict::new(py);
                d.set_item("step", e.step)?;
                d.set_item("mean_return", e.mean_return)?;
                d.set_item("std_return", e.std_return)?;
                d.set_item("critic_loss", e.critic_loss)?;
                d.set_item("actor_loss", e.actor_loss)?;
                d.set_item("gradient_steps", e.gradient_steps)?;
                d.set_item("actor_sparsity", e.actor_sparsity)?;
                Ok(d)
            })
            .collect()
    }

    /// Connectivity timeline of `network`: steps, relevant and noise means.
    fn connectivity<'py>(&self, py: Python<'py>, network: &str) -> PyResult<Bound<'py, PyDict>> {
        let kind = self::network(network)?;
        let t = self
            .inner
            .log()
            .connectivity
            .timeline(kind)
            .ok_or_else(|| PyValueError::new_err("no timeline"))?;
        let d = PyDict::new(py);
        d.set_item("steps", t.steps.clone())?;
        d.set_item("relevant_mean", t.relevant_mean.clone())?;
        d.set_item("noise_mean", t.noise_mean.clone())?;
        Ok(d)
    }

    fn checkpoint<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        let bytes = self.inner.to_checkpoint_bytes().map_err(to_py)?;
        Ok(PyBytes::new(py, &bytes))
    }

    #[staticmethod]
    fn restore(data: &[u8]) -> PyResult<Self> {
        Ok(Self {
            inner: harness::Trainer::from_checkpoint_bytes(data).map_err(to_py)?,
        })
    }
}

#[pymodule]
fn anf_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(ene_dim, m)?)?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_function(wrap_pyfunction!(suites, m)?)?;
    m.add_function(wrap_pyfunction!(config_reference, m)?)?;
    m.add_function(wrap_pyfunction!(resolve_config, m)?)?;
    m.add_function(wrap_pyfunction!(final_score, m)?)?;
    m.add_function(wrap_pyfunction!(mean_ci, m)?)?;
    m.add_function(wrap_pyfunction!(conjecture, m)?)?;
    m.add_function(wrap_pyfunction!(execute_run, m)?)?;
    m.add_class::<Trainer>()?;
    Ok(())
}
