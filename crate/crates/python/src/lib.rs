//! Python bindings: information measures, semantic-network analysis,
//! generative models with perception and planning, and scenario runs.
//!
//! Probability vectors and matrices cross the boundary as nested lists;
//! matrices are row-major with concepts on columns.

use conceptgen::environment::{fixture as builtin_fixture, FIXTURE_NAMES};
use conceptgen::genmodel::{enumerate_policies, GenerativeModel, Policy, DEFAULT_POLICY_CAP};
use conceptgen::inference::{self, BeliefState};
use conceptgen::knowledge::{run_curriculum, Curriculum};
use conceptgen::probmath::{self, Categorical, JointDistribution, Matrix};
use conceptgen::scenario::Scenario;
use conceptgen::semnet::{self, ConceptStimulusMatrix, MatrixMode, TransferEnergyReport, DEFAULT_LAMBDA};
use conceptgen::Error;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Rows = Vec<Vec<f64>>;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Enumeration(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for conceptgen::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn matrix(rows: &Rows) -> PyResult<Matrix> {
    Matrix::from_rows(rows).py()
}

/// Shannon entropy in nats.
#[pyfunction]
fn entropy(p: Vec<f64>) -> PyResult<f64> {
    Ok(probmath::entropy(&Categorical::new(p).py()?))
}

/// `KL[p ‖ q]` in nats.
#[pyfunction]
fn kl_divergence(p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    probmath::kl_divergence(&Categorical::new(p).py()?, &Categorical::new(q).py()?).py()
}

/// Mutual information of a joint table, in nats.
#[pyfunction]
fn mutual_information(joint: Rows) -> PyResult<f64> {
    Ok(probmath::mutual_information(&JointDistribution::from_rows(&joint).py()?))
}

#[pyfunction]
#[pyo3(signature = (values, gamma = 1.0))]
fn softmax(values: Vec<f64>, gamma: f64) -> Vec<f64> {
    probmath::softmax(&values, gamma).into_vec()
}

fn report_dict<'py>(py: Python<'py>, r: &TransferEnergyReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("lambda", r.lambda)?;
    d.set_item("information", r.information)?;
    d.set_item("concept_entropy", r.concept_entropy)?;
    d.set_item("omega", r.omega)?;
    d.set_item("a_omega", r.a_omega)?;
    d.set_item("scaled_omega", r.scaled_omega)?;
    Ok(d)
}

/// Stimulus-by-concept link matrix.
#[pyclass(name = "ConceptStimulusMatrix", frozen)]
struct PyConceptStimulusMatrix {
    inner: ConceptStimulusMatrix,
}

#[pymethods]
impl PyConceptStimulusMatrix {
    /// `entries[stimulus][concept]`; `binary` requires 0/1 entries.
    #[new]
    #[pyo3(signature = (entries, binary = true))]
    fn new(entries: Rows, binary: bool) -> PyResult<Self> {
        let mode = if binary { MatrixMode::Binary } else { MatrixMode::Weighted };
        Ok(Self {
            inner: ConceptStimulusMatrix::new(matrix(&entries)?, mode).py()?,
        })
    }

    #[getter]
    fn entries(&self) -> Rows {
        self.inner.entries().to_rows()
    }

    #[pyo3(signature = (lam = DEFAULT_LAMBDA))]
    fn transfer_energy<'py>(&self, py: Python<'py>, lam: f64) -> PyResult<Bound<'py, PyDict>> {
        report_dict(py, &semnet::transfer_energy(&self.inner, lam).py()?)
    }

    fn machine_transfer_energy(&self) -> PyResult<f64> {
        semnet::machine_transfer_energy(&self.inner).py()
    }

    fn similarity(&self) -> Rows {
        semnet::similarity_matrix(&self.inner).to_rows()
    }

    fn synsets(&self) -> PyResult<Vec<Vec<usize>>> {
        semnet::synsets(&self.inner).py()
    }

    /// Ω at `k` evenly spaced λ in `[0, 1]`.
    fn lambda_profile<'py>(&self, py: Python<'py>, k: usize) -> PyResult<Vec<Bound<'py, PyDict>>> {
        semnet::lambda_profile(&self.inner, k)
            .py()?
            .iter()
            .map(|r| report_dict(py, r))
            .collect()
    }
}

/// Greedy bit-flip search for a low-Ω binary matrix. Returns the matrix and
/// its transfer-energy report.
#[pyfunction]
#[pyo3(signature = (concepts, stimuli, lam = DEFAULT_LAMBDA, seed = 0, restarts = 8))]
fn optimize<'py>(
    py: Python<'py>,
    concepts: usize,
    stimuli: usize,
    lam: f64,
    seed: u64,
    restarts: usize,
) -> PyResult<(PyConceptStimulusMatrix, Bound<'py, PyDict>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (m, r) = semnet::optimize_matrix(concepts, stimuli, lam, &mut rng, restarts).py()?;
    Ok((PyConceptStimulusMatrix { inner: m }, report_dict(py, &r)?))
}

/// Agent's generative model over `n` concepts and `m` stimuli.
#[pyclass(name = "GenerativeModel", frozen)]
struct PyGenerativeModel {
    inner: GenerativeModel,
}

#[pymethods]
impl PyGenerativeModel {
    /// `c` holds one preference vector shared by every step, or one per step.
    /// Without `policies`, every action sequence of length `horizon - 1`.
    #[new]
    #[pyo3(signature = (a, b, c, d, horizon, gamma = 1.0, policies = None))]
    fn new(
        a: Rows,
        b: Vec<Rows>,
        c: Rows,
        d: Vec<f64>,
        horizon: usize,
        gamma: f64,
        policies: Option<Vec<Vec<usize>>>,
    ) -> PyResult<Self> {
        let b = b.iter().map(matrix).collect::<PyResult<Vec<_>>>()?;
        let c = c.into_iter().map(Categorical::new).collect::<conceptgen::Result<Vec<_>>>().py()?;
        let policies = match policies {
            Some(p) => p.into_iter().map(Policy::new).collect(),
            None => enumerate_policies(b.len().max(1), horizon.saturating_sub(1), DEFAULT_POLICY_CAP).py()?,
        };
        let inner = GenerativeModel::new(matrix(&a)?, b, c, Categorical::new(d).py()?, gamma, horizon, policies).py()?;
        Ok(Self { inner })
    }

    #[getter]
    fn policies(&self) -> Vec<Vec<usize>> {
        self.inner.policies().iter().map(|p| p.actions.clone()).collect()
    }

    /// Mean-field beliefs under policy `policy`: marginals, F and the
    /// per-sweep F history.
    #[pyo3(signature = (obs, policy = 0))]
    fn perceive<'py>(&self, py: Python<'py>, obs: Vec<usize>, policy: usize) -> PyResult<Bound<'py, PyDict>> {
        let pi = self.policy(policy)?;
        let p = inference::perceive(&self.inner, pi, &obs).py()?;
        let d = PyDict::new(py);
        d.set_item("marginals", p.marginals)?;
        d.set_item("free_energy", p.free_energy)?;
        d.set_item("history", p.history)?;
        d.set_item("converged", p.converged)?;
        Ok(d)
    }

    /// Enumerated posterior marginals and `−ln p(obs | π)`.
    #[pyo3(signature = (obs, policy = 0))]
    fn exact_posterior(&self, obs: Vec<usize>, policy: usize) -> PyResult<(Rows, f64)> {
        let e = inference::exact_posterior(&self.inner, self.policy(policy)?, &obs).py()?;
        Ok((e.marginals, e.surprisal))
    }

    /// Perception under every policy plus the policy posterior; with
    /// `planning`, also expected free energy.
    #[pyo3(signature = (obs, planning = true))]
    fn infer<'py>(&self, py: Python<'py>, obs: Vec<usize>, planning: bool) -> PyResult<Bound<'py, PyDict>> {
        let b: BeliefState = inference::infer(&self.inner, &obs, planning).py()?;
        let d = PyDict::new(py);
        d.set_item("policy_posterior", b.policy_posterior.probs().to_vec())?;
        d.set_item("free_energy", b.free_energies())?;
        d.set_item("expected_free_energy", b.efe.as_ref().map(|e| e.totals()))?;
        d.set_item("marginals", b.marginals())?;
        // the action leaving the latest observed step, when one remains
        let action = if planning && !obs.is_empty() && obs.len() < self.inner.horizon() {
            Some(inference::select_action(b.policy_posterior.probs(), self.inner.policies(), obs.len() - 1).py()?)
        } else {
            None
        };
        d.set_item("action", action)?;
        Ok(d)
    }
}

impl PyGenerativeModel {
    fn policy(&self, k: usize) -> PyResult<&Policy> {
        self.inner
            .policies()
            .get(k)
            .ok_or_else(|| PyValueError::new_err(format!("policy {k} out of range")))
    }
}

/// Environment, agent and regime, as read from a scenario file.
#[pyclass(name = "Scenario", frozen)]
struct PyScenario {
    inner: Scenario,
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: Scenario::from_json(text).py()?,
        })
    }

    #[staticmethod]
    fn fixture(name: &str) -> PyResult<Self> {
        Ok(Self {
            inner: builtin_fixture(name).py()?,
        })
    }

    #[staticmethod]
    fn fixture_names() -> Vec<&'static str> {
        FIXTURE_NAMES.to_vec()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn episodes(&self) -> usize {
        self.inner.episodes
    }

    #[getter]
    fn use_episodes(&self) -> usize {
        self.inner.use_episodes
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    /// Runs the learning and use phases; defaults come from the scenario.
    #[pyo3(signature = (episodes = None, use_episodes = None, seed = None))]
    fn run(&self, episodes: Option<usize>, use_episodes: Option<usize>, seed: Option<u64>) -> PyResult<PyCurriculum> {
        let s = &self.inner;
        let run = run_curriculum(
            s,
            episodes.unwrap_or(s.episodes),
            use_episodes.unwrap_or(s.use_episodes),
            seed.unwrap_or(s.seed),
        )
        .py()?;
        Ok(PyCurriculum { inner: run })
    }
}

/// Outcome of a scenario run.
#[pyclass(name = "Curriculum", frozen)]
struct PyCurriculum {
    inner: Curriculum,
}

#[pymethods]
impl PyCurriculum {
    #[getter]
    fn regime(&self) -> String {
        self.inner.summary.regime.to_string()
    }

    /// Mean surprisal per episode.
    #[getter]
    fn surprisal_curve(&self) -> Vec<f64> {
        self.inner.summary.surprisal_curve.clone()
    }

    #[getter]
    fn preferred_frequency_use(&self) -> Option<f64> {
        self.inner.summary.preferred_frequency_use
    }

    /// Dirichlet-mean `A` after the run.
    #[getter]
    fn final_a(&self) -> Rows {
        self.inner.summary.final_model.a.clone()
    }

    #[getter]
    fn n_concepts(&self) -> usize {
        self.inner.summary.final_model.n_concepts
    }

    /// `(episode, observation, action)` for every step.
    fn steps(&self) -> Vec<(usize, usize, Option<usize>)> {
        self.inner
            .traces
            .iter()
            .flat_map(|t| t.records.iter().map(|r| (r.episode, r.observation, r.action)))
            .collect()
    }

    /// Full summary as JSON, including per-episode metrics and expansions.
    fn summary_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner.summary).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }
}

#[pymodule]
fn conceptgen_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(entropy, m)?)?;
    m.add_function(wrap_pyfunction!(kl_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(mutual_information, m)?)?;
    m.add_function(wrap_pyfunction!(softmax, m)?)?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_class::<PyConceptStimulusMatrix>()?;
    m.add_class::<PyGenerativeModel>()?;
    m.add_class::<PyScenario>()?;
    m.add_class::<PyCurriculum>()?;
    m.add("DEFAULT_LAMBDA", DEFAULT_LAMBDA)?;
    Ok(())
}
